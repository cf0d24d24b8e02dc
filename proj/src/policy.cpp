// Copyright 2026 The EnclaveFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "efl/policy.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "efl/error.hpp"

namespace efl::policy {
namespace {

constexpr std::size_t kMaxRandomBytes = 4096;

[[noreturn]] void Invalid(const std::string& why) {
  throw Error(ErrorCode::kPolicyInvalid, why);
}

bool IsIdentifier(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  auto alpha = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin(), s.end(),
                     [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

bool IsClientId(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
           (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
  });
}

void RequireKeys(const Json& obj, std::initializer_list<std::string_view> allowed,
                 std::string_view where) {
  if (!obj.is_object()) Invalid(std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      Invalid("unknown field '" + key + "' in " + std::string(where));
    }
  }
}

const Json& RequireArray(const Json& obj, const char* key) {
  const Json& v = RequireField(obj, key);
  if (!v.is_array()) Invalid(std::string("field '") + key + "' must be a list");
  return v;
}

SecretSpec ParseKind(std::string name, std::string_view kind) {
  SecretSpec s;
  s.name = std::move(name);
  constexpr std::string_view kRandomPrefix = "random-hex-";
  if (kind == "symmetric-key-256") {
    s.kind = SecretKind::kSymmetricKey256;
  } else if (kind == "provided-value") {
    s.kind = SecretKind::kProvidedValue;
  } else if (kind.starts_with(kRandomPrefix)) {
    std::string_view digits = kind.substr(kRandomPrefix.size());
    std::size_t n = 0;
    auto [end, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || end != digits.data() + digits.size() ||
        digits.empty() || digits[0] == '0') {
      Invalid("bad secret kind '" + std::string(kind) + "'");
    }
    s.kind = SecretKind::kRandomHex;
    s.random_bytes = n;
  } else {
    Invalid("unknown secret kind '" + std::string(kind) + "'");
  }
  return s;
}

Mechanism ParseMechanism(std::string_view name) {
  if (name == "argument") return Mechanism::kArgument;
  if (name == "environment-variable") return Mechanism::kEnvironmentVariable;
  if (name == "file-template") return Mechanism::kFileTemplate;
  Invalid("unknown injection mechanism '" + std::string(name) + "'");
}

bool IsSafeRelativePath(std::string_view p) {
  if (p.empty() || p.front() == '/' || p.find('\0') != std::string_view::npos) {
    return false;
  }
  std::size_t start = 0;
  while (start <= p.size()) {
    auto slash = p.find('/', start);
    auto part = p.substr(start, slash == std::string_view::npos
                                    ? std::string_view::npos
                                    : slash - start);
    if (part.empty() || part == "." || part == "..") return false;
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return true;
}

// Position of the token starting at text[i] ("$$NAME$$"), as the name
// length; 0 if there is none.
std::size_t TokenAt(std::string_view text, std::size_t i) {
  if (text.compare(i, 2, "$$") != 0) return 0;
  std::size_t j = i + 2;
  while (j < text.size() &&
         ((text[j] >= 'A' && text[j] <= 'Z') ||
          (text[j] >= 'a' && text[j] <= 'z') ||
          (text[j] >= '0' && text[j] <= '9') || text[j] == '_')) {
    ++j;
  }
  std::size_t len = j - i - 2;
  if (len == 0 || !IsIdentifier(text.substr(i + 2, len))) return 0;
  if (text.compare(j, 2, "$$") != 0) return 0;
  return len;
}

}  // namespace

std::string SecretSpec::KindName() const {
  switch (kind) {
    case SecretKind::kSymmetricKey256: return "symmetric-key-256";
    case SecretKind::kRandomHex: return "random-hex-" + std::to_string(random_bytes);
    case SecretKind::kProvidedValue: return "provided-value";
  }
  return "unknown";
}

std::string_view MechanismName(Mechanism m) {
  switch (m) {
    case Mechanism::kArgument: return "argument";
    case Mechanism::kEnvironmentVariable: return "environment-variable";
    case Mechanism::kFileTemplate: return "file-template";
  }
  return "unknown";
}

std::vector<std::string> TemplateTokens(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    if (std::size_t len = TokenAt(text, i)) {
      out.emplace_back(text.substr(i + 2, len));
      i += len + 4;
    } else {
      ++i;
    }
  }
  return out;
}

std::string RenderTemplate(std::string_view text,
                           const std::map<std::string, std::string>& secrets) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (std::size_t len = TokenAt(text, i)) {
      std::string name(text.substr(i + 2, len));
      auto it = secrets.find(name);
      if (it == secrets.end()) {
        throw Error(ErrorCode::kTemplate, "unresolved token $$" + name + "$$");
      }
      out += it->second;
      i += len + 4;
    } else {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

Policy Policy::FromJson(const Json& json, bool redacted) {
  Policy p;
  try {
    RequireKeys(json,
                {"name", "measurements", "platform_roots", "min_svn", "roster",
                 "validation_dataset_hash", "session", "secrets", "injection"},
                "policy");
    p.name = RequireString(json, "name");

    const Json& m = RequireField(json, "measurements");
    RequireKeys(m, {kMeasurementCoordinator, kMeasurementClient, kMeasurementManager},
                "measurements");
    for (const auto& [role, value] : m.items()) {
      if (!value.is_string()) Invalid("measurement for '" + role + "' must be hex");
      p.measurements[role] = tee::Measurement::FromHex(value.get<std::string>());
    }

    for (const Json& root : RequireArray(json, "platform_roots")) {
      if (!root.is_string()) Invalid("platform roots must be hex strings");
      p.platform_roots.push_back(
          HexDecodeFixed<crypto::kPublicKeySize>(root.get<std::string>()));
    }
    if (json.contains("min_svn")) {
      std::uint64_t svn = RequireUnsigned(json, "min_svn");
      if (svn > 0xffff) Invalid("min_svn out of range");
      p.min_svn = static_cast<std::uint16_t>(svn);
    }

    for (const Json& e : RequireArray(json, "roster")) {
      RequireKeys(e, {"client_id", "dataset_hash"}, "roster entry");
      p.roster.push_back(
          {RequireString(e, "client_id"),
           HexDecodeFixed<crypto::kDigestSize>(RequireString(e, "dataset_hash"))});
    }
    if (json.contains("validation_dataset_hash")) {
      p.validation_dataset_hash = HexDecodeFixed<crypto::kDigestSize>(
          RequireString(json, "validation_dataset_hash"));
    }
    if (json.contains("session")) {
      p.session = SessionConfig::FromJson(json.at("session"));
    }

    if (json.contains("secrets")) {
      for (const Json& s : RequireArray(json, "secrets")) {
        RequireKeys(s, {"name", "kind", "value"}, "secret");
        SecretSpec spec = ParseKind(RequireString(s, "name"), RequireString(s, "kind"));
        if (s.contains("value")) spec.value = RequireString(s, "value");
        p.secrets.push_back(std::move(spec));
      }
    }

    if (json.contains("injection")) {
      for (const Json& r : RequireArray(json, "injection")) {
        RequireKeys(r, {"role", "client_id", "mechanism", "variable", "path",
                        "value", "template"},
                    "injection rule");
        InjectionRule rule;
        rule.role = RequireString(r, "role");
        if (r.contains("client_id")) rule.client_id = RequireString(r, "client_id");
        rule.mechanism = ParseMechanism(RequireString(r, "mechanism"));
        auto forbid = [&](const char* key) {
          if (r.contains(key)) {
            Invalid(std::string("field '") + key + "' does not apply to " +
                    std::string(MechanismName(rule.mechanism)));
          }
        };
        switch (rule.mechanism) {
          case Mechanism::kArgument:
            forbid("variable"), forbid("path"), forbid("template");
            rule.text = RequireString(r, "value");
            break;
          case Mechanism::kEnvironmentVariable:
            forbid("path"), forbid("template");
            rule.target = RequireString(r, "variable");
            rule.text = RequireString(r, "value");
            break;
          case Mechanism::kFileTemplate:
            forbid("variable"), forbid("value");
            rule.target = RequireString(r, "path");
            rule.text = RequireString(r, "template");
            break;
        }
        p.injection.push_back(std::move(rule));
      }
    }
    p.Validate(redacted);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kPolicyInvalid) throw;
    Invalid(e.what());
  } catch (const Json::exception& e) {
    Invalid(e.what());
  }
  return p;
}

Policy Policy::Parse(std::string_view document) {
  Json json;
  try {
    json = ParseJson(document);
  } catch (const Error& e) {
    Invalid(e.what());
  }
  return FromJson(json);
}

void Policy::Validate(bool redacted) const {
  if (name.empty() || name.size() > 128) Invalid("name must be 1-128 bytes");
  for (auto role : {kMeasurementCoordinator, kMeasurementClient, kMeasurementManager}) {
    if (!measurements.contains(std::string(role))) {
      Invalid("missing measurement for '" + std::string(role) + "'");
    }
  }
  if (platform_roots.empty()) Invalid("at least one platform root is required");
  if (roster.empty()) Invalid("roster must not be empty");
  std::set<std::string> ids;
  for (const auto& e : roster) {
    if (!IsClientId(e.client_id)) Invalid("bad client id '" + e.client_id + "'");
    if (!ids.insert(e.client_id).second) {
      Invalid("duplicate client id '" + e.client_id + "'");
    }
  }
  session.Validate(roster.size());

  std::set<std::string> names;
  for (const auto& s : secrets) {
    if (!IsIdentifier(s.name)) Invalid("bad secret name '" + s.name + "'");
    if (!names.insert(s.name).second) {
      Invalid("duplicate secret name '" + s.name + "'");
    }
    bool provided = s.kind == SecretKind::kProvidedValue;
    if (!provided && s.value) {
      Invalid("secret '" + s.name + "' is generated and must not carry a value");
    }
    if (provided && !s.value && !redacted) {
      Invalid("provided-value secret '" + s.name + "' has no value");
    }
    if (s.kind == SecretKind::kRandomHex &&
        (s.random_bytes < 1 || s.random_bytes > kMaxRandomBytes)) {
      Invalid("random-hex length out of range for '" + s.name + "'");
    }
  }

  for (const auto& r : injection) {
    if (r.role != kMeasurementCoordinator && r.role != kMeasurementClient) {
      Invalid("injection role must be coordinator or client, got '" + r.role + "'");
    }
    if (r.client_id) {
      if (r.role != kMeasurementClient) {
        Invalid("client_id only applies to client-role rules");
      }
      if (!ids.contains(*r.client_id)) {
        Invalid("injection rule names unknown client '" + *r.client_id + "'");
      }
    }
    if (r.mechanism == Mechanism::kEnvironmentVariable && !IsIdentifier(r.target)) {
      Invalid("bad environment variable name '" + r.target + "'");
    }
    if (r.mechanism == Mechanism::kFileTemplate && !IsSafeRelativePath(r.target)) {
      Invalid("file template path must be relative: '" + r.target + "'");
    }
    for (const auto& token : TemplateTokens(r.text)) {
      if (!names.contains(token)) {
        Invalid("injection rule references undeclared secret '" + token + "'");
      }
    }
  }
}

Json Policy::ToJson() const {
  Json m = Json::object();
  for (const auto& [role, meas] : measurements) m[role] = meas.Hex();

  std::vector<std::string> roots;
  for (const auto& r : platform_roots) roots.push_back(HexEncode(r));
  std::sort(roots.begin(), roots.end());

  std::vector<const RosterEntry*> sorted_roster;
  for (const auto& e : roster) sorted_roster.push_back(&e);
  std::sort(sorted_roster.begin(), sorted_roster.end(),
            [](auto* a, auto* b) { return a->client_id < b->client_id; });
  Json r = Json::array();
  for (auto* e : sorted_roster) {
    r.push_back({{"client_id", e->client_id},
                 {"dataset_hash", HexEncode(e->dataset_hash)}});
  }

  std::vector<const SecretSpec*> sorted_secrets;
  for (const auto& s : secrets) sorted_secrets.push_back(&s);
  std::sort(sorted_secrets.begin(), sorted_secrets.end(),
            [](auto* a, auto* b) { return a->name < b->name; });
  Json s = Json::array();
  for (auto* spec : sorted_secrets) {
    Json j = {{"name", spec->name}, {"kind", spec->KindName()}};
    if (spec->value) j["value"] = *spec->value;
    s.push_back(std::move(j));
  }

  Json inj = Json::array();
  for (const auto& rule : injection) {
    Json j = {{"role", rule.role}, {"mechanism", MechanismName(rule.mechanism)}};
    if (rule.client_id) j["client_id"] = *rule.client_id;
    switch (rule.mechanism) {
      case Mechanism::kArgument:
        j["value"] = rule.text;
        break;
      case Mechanism::kEnvironmentVariable:
        j["variable"] = rule.target;
        j["value"] = rule.text;
        break;
      case Mechanism::kFileTemplate:
        j["path"] = rule.target;
        j["template"] = rule.text;
        break;
    }
    inj.push_back(std::move(j));
  }

  Json out = {{"name", name},
              {"measurements", std::move(m)},
              {"platform_roots", roots},
              {"min_svn", min_svn},
              {"roster", std::move(r)},
              {"session", session.ToJson()},
              {"secrets", std::move(s)},
              {"injection", std::move(inj)}};
  if (validation_dataset_hash) {
    out["validation_dataset_hash"] = HexEncode(*validation_dataset_hash);
  }
  return out;
}

crypto::Digest Policy::Hash() const { return crypto::Sha256(AsBytes(Canonical())); }

Json Policy::PublicView() const {
  Json view = ToJson();
  for (Json& s : view["secrets"]) s.erase("value");
  return view;
}

const RosterEntry* Policy::FindClient(std::string_view client_id) const {
  for (const auto& e : roster) {
    if (e.client_id == client_id) return &e;
  }
  return nullptr;
}

const SecretSpec* Policy::FindSecret(std::string_view secret_name) const {
  for (const auto& s : secrets) {
    if (s.name == secret_name) return &s;
  }
  return nullptr;
}

attest::AttestationPolicy Policy::AttestationFor(std::string_view role) const {
  auto it = measurements.find(std::string(role));
  if (it == measurements.end()) {
    throw Error(ErrorCode::kRoleUnknown, "no measurement for role '" +
                                             std::string(role) + "'");
  }
  return {platform_roots, {it->second}, min_svn};
}

Json InjectionBundle::ToJson() const {
  Json j = {{"policy_hash", policy_hash},
            {"role", role},
            {"arguments", arguments},
            {"environment", environment},
            {"files", files},
            {"environment_secrets", environment_secrets},
            {"policy", policy}};
  if (client_id) j["client_id"] = *client_id;
  return j;
}

InjectionBundle InjectionBundle::FromJson(const Json& json) {
  InjectionBundle b;
  try {
    b.policy_hash = RequireString(json, "policy_hash");
    b.role = RequireString(json, "role");
    if (json.contains("client_id")) b.client_id = RequireString(json, "client_id");
    b.arguments = RequireField(json, "arguments").get<std::vector<std::string>>();
    b.environment =
        RequireField(json, "environment").get<std::map<std::string, std::string>>();
    b.files = RequireField(json, "files").get<std::map<std::string, std::string>>();
    b.environment_secrets = RequireField(json, "environment_secrets")
                                .get<std::map<std::string, std::string>>();
    b.policy = RequireField(json, "policy");
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kDecode, std::string("bundle: ") + e.what());
  }
  return b;
}

InjectionBundle BuildBundle(const Policy& policy,
                            const crypto::Digest& policy_hash,
                            std::string_view role,
                            const std::optional<std::string>& client_id,
                            const std::map<std::string, std::string>& secrets) {
  if (role != kMeasurementCoordinator && role != kMeasurementClient) {
    throw Error(ErrorCode::kRoleUnknown,
                "no injection role '" + std::string(role) + "'");
  }
  if (role == kMeasurementClient &&
      (!client_id || policy.FindClient(*client_id) == nullptr)) {
    throw Error(ErrorCode::kAccessDenied, "client id is not on the roster");
  }
  InjectionBundle b;
  b.policy_hash = HexEncode(policy_hash);
  b.role = std::string(role);
  if (role == kMeasurementClient) b.client_id = client_id;
  for (const auto& rule : policy.injection) {
    if (rule.role != role) continue;
    if (rule.client_id && rule.client_id != client_id) continue;
    std::string rendered = RenderTemplate(rule.text, secrets);
    switch (rule.mechanism) {
      case Mechanism::kArgument:
        b.arguments.push_back(std::move(rendered));
        break;
      case Mechanism::kEnvironmentVariable: {
        auto tokens = TemplateTokens(rule.text);
        if (tokens.size() == 1 && rule.text == "$$" + tokens[0] + "$$") {
          b.environment_secrets[rule.target] = tokens[0];
        }
        b.environment[rule.target] = std::move(rendered);
        break;
      }
      case Mechanism::kFileTemplate:
        b.files[rule.target] = std::move(rendered);
        break;
    }
  }
  b.policy = policy.PublicView();
  return b;
}

}  // namespace efl::policy
