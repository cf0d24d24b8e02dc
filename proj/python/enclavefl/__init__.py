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

"""Python bindings for the enclavefl core library."""

from ._core import (
    Error,
    aggregate,
    canonical_policy,
    measure,
    policy_hash,
    render_template,
    role_measurement,
    run_demo,
    verify_audit,
)

__all__ = [
    "Error",
    "aggregate",
    "canonical_policy",
    "measure",
    "policy_hash",
    "render_template",
    "role_measurement",
    "run_demo",
    "verify_audit",
]
__version__ = "0.1.0"
