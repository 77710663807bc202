#include "attestgate/prover.hpp"

#include <fstream>

#include "attestgate/error.hpp"

namespace attestgate {

TamperMode parse_tamper_mode(std::string_view s) {
  if (s.empty() || s == "none") return TamperMode::None;
  if (s == "log") return TamperMode::Log;
  if (s == "nonce") return TamperMode::Nonce;
  if (s == "key") return TamperMode::Key;
  throw Error(Errc::ParseError, "unknown tamper mode '" + std::string(s) + "'");
}

std::string_view to_string(TamperMode mode) {
  switch (mode) {
    case TamperMode::None: return "none";
    case TamperMode::Log: return "log";
    case TamperMode::Nonce: return "nonce";
    case TamperMode::Key: return "key";
  }
  return "none";
}

ProverAgent::ProverAgent(DeviceIdentity identity, TamperMode tamper)
    : identity_(std::move(identity)), tamper_(tamper) {}

ProverAgent ProverAgent::boot_from_files(const std::filesystem::path& bundle, const std::filesystem::path& identity,
                                         TamperMode tamper, BundleFormat format) {
  std::ifstream in(identity);
  if (!in) throw Error(Errc::ParseError, "cannot read identity " + identity.string());
  auto j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, "identity file is not JSON");
  ProverAgent agent(DeviceIdentity::from_json(j), tamper);
  agent.boot(load_bundle(bundle, format));
  return agent;
}

void ProverAgent::boot(const FirmwareBundle& bundle) {
  if (measurement_) throw Error(Errc::Protocol, "prover already booted");
  measurement_ = measure_boot(bundle);
}

const BootMeasurement& ProverAgent::measurement() const {
  if (!measurement_) throw Error(Errc::NotBooted, "prover has not booted");
  return *measurement_;
}

AttestationQuote ProverAgent::quote(const Digest& nonce) {
  const auto& boot = measurement();
  AttestationQuote q;
  switch (tamper_) {
    case TamperMode::None:
      q = generate_quote(boot, identity_, nonce);
      break;
    case TamperMode::Log: {
      auto forged = boot;
      forged.log.front().digest[0] ^= 0x01;
      q = generate_quote(forged, identity_, nonce);
      break;
    }
    case TamperMode::Nonce: {
      Digest stale = last_nonce_.value_or(nonce);
      if (stale == nonce) stale[0] ^= 0x01;
      q = generate_quote(boot, identity_, stale);
      break;
    }
    case TamperMode::Key: {
      auto seed = sha256(identity_.key.seed_hex() + ":unenrolled");
      DeviceIdentity rogue{identity_.device_id, SigningKey::from_seed(seed)};
      q = generate_quote(boot, rogue, nonce);
      break;
    }
  }
  last_nonce_ = nonce;
  return q;
}

Json ProverAgent::handle_challenge(const Json& message) {
  try {
    return quote_message(quote(parse_challenge(message)));
  } catch (const Error& e) {
    return error_message(e.name(), e.what());
  }
}

Json run_prover_session(ProverAgent& agent, const std::string& host, int port) {
  auto sock = connect_tcp(host, port);
  auto challenge = read_frame(sock);
  auto response = agent.handle_challenge(challenge);
  write_frame(sock, response);
  if (response.value("type", "") == "error") {
    throw Error(Errc::MalformedChallenge, response.value("detail", std::string("bad challenge")));
  }
  return read_frame(sock);
}

}  // namespace attestgate
