#!/usr/bin/env python3
# Copyright 2026 The EnclaveFL Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent reference values for the C++ tests.

Uses hashlib/struct/json and the `cryptography` package, none of the project
code. The printed values are frozen into tests/vectors_test.cpp and the
golden shielded file into tests/data; rerun this if a format changes on
purpose and update both together.
"""

import hashlib
import json
import os
import struct
import sys


def canonical(value):
    return json.dumps(value, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode()


def measure(code, config):
    h = hashlib.sha256()
    h.update(struct.pack(">Q", len(code)) + code)
    h.update(struct.pack(">Q", len(config)) + config)
    return h.hexdigest()


def derive_seed(*parts):
    data = b"efl/seed/v1" + b"".join(struct.pack(">Q", p) for p in parts)
    return struct.unpack(">Q", hashlib.sha256(data).digest()[:8])[0]


def derive_seed_labelled(base, label, index):
    data = (b"efl/seed/v1" + struct.pack(">Q", base) +
            struct.pack(">I", len(label)) + label.encode() +
            struct.pack(">Q", index))
    return struct.unpack(">Q", hashlib.sha256(data).digest()[:8])[0]


def key_id(name):
    return hashlib.sha256(b"efl/key-id/v1" + name.encode()).hexdigest()[:32]


def params_hash(weights):
    data = struct.pack(">I", len(weights)) + b"".join(
        struct.pack(">d", w) for w in weights)
    return hashlib.sha256(data).hexdigest()


def audit_entry_hash(prev_hex, seq, ts, kind, payload):
    body = canonical({"kind": kind, "payload": payload, "seq": seq, "ts": ts})
    return hashlib.sha256(bytes.fromhex(prev_hex) + body).hexdigest()


SESSION_DEFAULTS = {
    "min_clients": 1, "max_rounds": 30, "target_accuracy": 1.0,
    "convergence_epsilon": 0.0001, "patience": 3, "learning_rate": 0.1,
    "local_epochs": 2, "batch_size": 16, "clone_mode": "random",
    "clone_count": 8, "clone_subset_size": 1, "outlier_threshold": 0.02,
    "rng_seed": 0, "round_deadline_ms": 30000,
}

POLICY_CANONICAL = {
    "name": "vector",
    "measurements": {"client": "11" * 32, "coordinator": "22" * 32,
                     "policy_manager_self": "33" * 32},
    "platform_roots": ["44" * 32],
    "min_svn": 0,
    "roster": [{"client_id": "a", "dataset_hash": "55" * 32},
               {"client_id": "b", "dataset_hash": "66" * 32}],
    "session": SESSION_DEFAULTS,
    "secrets": [{"name": "K", "kind": "symmetric-key-256"},
                {"name": "P", "kind": "provided-value", "value": "pv"}],
    "injection": [{"role": "client", "mechanism": "environment-variable",
                   "variable": "KEY", "value": "$$K$$"}],
}


GOLDEN_PLAINTEXT = b"golden checkpoint payload\n"


def golden_shielded_file():
    from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

    key = bytes(range(32))
    header = (b"SFL1" + struct.pack(">HB", 1, 1) +
              bytes.fromhex(key_id("CHECKPOINT_KEY")) +
              bytes(range(0xc0, 0xd0)) + struct.pack(">Q", 7) +
              bytes(range(0xa0, 0xac)))
    nonce = header[-12:]
    return header + ChaCha20Poly1305(key).encrypt(nonce, GOLDEN_PLAINTEXT, header)


def main():
    print("measure", measure(b"enclavefl-test-code", b'{"role":"client"}'))
    print("seed_7_11_13", derive_seed(7, 11, 13))
    print("seed_42_client-01_5", derive_seed_labelled(42, "client-01", 5))
    print("key_id_DATA_KEY_1", key_id("DATA_KEY_1"))
    print("params_hash", params_hash([0.5, -1.25, 3.0]))
    print("audit_0", audit_entry_hash("00" * 32, 0, 1000, "test",
                                      {"a": 1, "b": "x"}))
    print("policy_hash", hashlib.sha256(canonical(POLICY_CANONICAL)).hexdigest())
    golden = golden_shielded_file()
    print("golden_sfl", golden.hex())
    if len(sys.argv) > 1:
        with open(os.path.join(sys.argv[1], "golden_v1.sfl"), "wb") as f:
            f.write(golden)


if __name__ == "__main__":
    main()
