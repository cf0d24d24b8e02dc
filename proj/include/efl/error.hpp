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

#ifndef EFL_ERROR_HPP_
#define EFL_ERROR_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace efl {

enum class ErrorCode {
  kInvalidInput,
  kDecode,
  kIo,
  kTimeout,
  // sim_tee
  kSealAuthentication,
  kIntegrity,
  // attestation / channels
  kHandshake,
  kAttestationRejected,
  kChannelIntegrity,
  kChannelReplay,
  kChannelClosed,
  // policy manager
  kPolicyInvalid,
  kPolicyConflict,
  kAlreadyGenerated,
  kAccessDenied,
  kRoleUnknown,
  kTemplate,
  kNotFound,
  // file shield
  kFreshnessToken,
  kRollbackDetected,
  kKeyResolution,
  // learning
  kNumericalDivergence,
  kInvalidConfig,
  // orchestration
  kRoundQuorum,
  kSessionFailed,
  kRejected,
};

std::string_view ErrorCodeName(ErrorCode code);
// Inverse of ErrorCodeName; nullopt for unknown names.
std::optional<ErrorCode> ErrorCodeFromName(std::string_view name);

// All library failures are reported through this exception type; callers
// branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace efl

#endif  // EFL_ERROR_HPP_
