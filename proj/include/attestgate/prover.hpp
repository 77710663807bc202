#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "attestgate/attestation.hpp"
#include "attestgate/bundle_io.hpp"
#include "attestgate/wire.hpp"

namespace attestgate {

/// Test hooks for negative end-to-end runs.
enum class TamperMode {
  None,
  Log,    // mutate one log digest before signing, keep the honest pcr
  Nonce,  // answer with a stale nonce instead of the challenge
  Key,    // sign with a key that was never enrolled
};

TamperMode parse_tamper_mode(std::string_view s);
std::string_view to_string(TamperMode mode);

/// Simulated device. Measures its bundle once at boot and answers
/// challenges from that measurement.
class ProverAgent {
 public:
  explicit ProverAgent(DeviceIdentity identity, TamperMode tamper = TamperMode::None);

  static ProverAgent boot_from_files(const std::filesystem::path& bundle, const std::filesystem::path& identity,
                                     TamperMode tamper = TamperMode::None,
                                     BundleFormat format = BundleFormat::Auto);

  /// Throws Errc::EmptyBundle; a second boot throws Errc::Protocol.
  void boot(const FirmwareBundle& bundle);
  bool booted() const { return measurement_.has_value(); }

  /// Throws Errc::NotBooted.
  const BootMeasurement& measurement() const;
  AttestationQuote quote(const Digest& nonce);

  /// Quote message for a well-formed challenge, error message otherwise.
  Json handle_challenge(const Json& message);

  const std::string& device_id() const { return identity_.device_id; }
  TamperMode tamper() const { return tamper_; }

 private:
  DeviceIdentity identity_;
  TamperMode tamper_;
  std::optional<BootMeasurement> measurement_;
  std::optional<Digest> last_nonce_;
};

/// Connects to a verifier, answers its challenge and returns the decision
/// message the verifier sends back. Throws Errc::Io / Errc::Protocol.
Json run_prover_session(ProverAgent& agent, const std::string& host, int port);

}  // namespace attestgate
