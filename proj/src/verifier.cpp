#include "attestgate/verifier.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

Json opt_hex(const std::optional<Digest>& d) { return d ? Json(to_hex(*d)) : Json(nullptr); }

std::optional<Digest> opt_digest(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return digest_from_hex(j[key].get<std::string>());
}

Decision deny(std::vector<std::string> reasons, Evidence evidence, std::string detail = {}) {
  Decision d;
  d.outcome = Outcome::Deny;
  d.reasons = std::move(reasons);
  d.evidence = std::move(evidence);
  d.detail = std::move(detail);
  return d;
}

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Allow: return "allow";
    case Outcome::AllowWithObligations: return "allow-with-obligations";
    case Outcome::Deny: return "deny";
  }
  return "deny";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "allow") return Outcome::Allow;
  if (s == "allow-with-obligations") return Outcome::AllowWithObligations;
  if (s == "deny") return Outcome::Deny;
  throw Error(Errc::ParseError, "unknown outcome '" + std::string(s) + "'");
}

Json Decision::to_json() const {
  Json obligation_list = Json::array();
  for (const auto& o : obligations) obligation_list.push_back(obligation_to_json(o));
  return {{"outcome", to_string(outcome)},
          {"reasons", reasons},
          {"obligations", obligation_list},
          {"evidence",
           {{"device_id", evidence.device_id},
            {"quote_pcr", opt_hex(evidence.pcr)},
            {"quote_digest", opt_hex(evidence.quote_digest)},
            {"aggregate", opt_hex(evidence.aggregate)},
            {"certificate_body_digest", opt_hex(evidence.certificate)}}},
          {"detail", detail}};
}

Decision Decision::from_json(const Json& j) {
  try {
    Decision d;
    d.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    d.reasons = j.at("reasons").get<std::vector<std::string>>();
    for (const auto& o : j.at("obligations")) d.obligations.push_back(obligation_from_json(o));
    if (j.contains("evidence")) {
      const auto& e = j["evidence"];
      d.evidence.device_id = e.value("device_id", "");
      d.evidence.pcr = opt_digest(e, "quote_pcr");
      d.evidence.quote_digest = opt_digest(e, "quote_digest");
      d.evidence.aggregate = opt_digest(e, "aggregate");
      d.evidence.certificate = opt_digest(e, "certificate_body_digest");
    }
    d.detail = j.value("detail", "");
    return d;
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("decision: ") + e.what());
  }
}

// --- audit log ------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& path) {
  file_ = std::fopen(path.c_str(), "ab");
  if (file_ == nullptr) throw Error(Errc::StorageFailure, "cannot open audit log " + path.string());
}

AuditLog::~AuditLog() {
  if (file_ != nullptr) std::fclose(file_);
}

void AuditLog::append(const Decision& decision) {
  auto j = decision.to_json();
  Json record{{"timestamp", std::chrono::duration_cast<std::chrono::seconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count()},
              {"device_id", decision.evidence.device_id},
              {"outcome", j["outcome"]},
              {"reasons", j["reasons"]},
              {"obligations", j["obligations"]},
              {"quote_pcr", j["evidence"]["quote_pcr"]},
              {"certificate_body_digest", j["evidence"]["certificate_body_digest"]},
              {"aggregate", j["evidence"]["aggregate"]},
              {"detail", decision.detail}};
  std::lock_guard lock(mutex_);
  if (file_ != nullptr) {
    auto line = record.dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
      throw Error(Errc::StorageFailure, "audit log write failed");
    }
  }
  records_.push_back(std::move(record));
}

std::vector<Json> AuditLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

// --- decision ----------------------------------------------------------------------------

Decision decide_admission(const AttestationResult& attestation, const CertFetchResult& fetch,
                          const SecurityPolicy& policy, const TrustStore& trust, AuditLog* audit) {
  Evidence evidence;
  evidence.device_id = attestation.device_id;

  auto decision = [&]() -> Decision {
    if (!attestation.ok) return deny({reason::kAttestation}, evidence, attestation.error);
    evidence.pcr = attestation.pcr;
    evidence.quote_digest = attestation.quote_digest;
    evidence.aggregate = attestation.software.aggregate;
    if (!fetch.available) return deny({reason::kCertServerUnavailable}, evidence, fetch.error);

    // Only certificates for exactly the attested software are candidates.
    std::vector<SignedCertificate> matching;
    for (const auto& c : fetch.certificates) {
      if (c.body.software_digest == attestation.software) matching.push_back(c);
    }
    auto selected = select_certificate(matching, policy, trust);
    if (!selected) return deny({reason::kNoCertificate}, evidence, "no acceptable certificate");
    evidence.certificate = selected->body_digest;

    auto outcome = evaluate_policy(selected->body, policy);
    Decision d;
    d.evidence = evidence;
    switch (outcome.kind) {
      case PolicyOutcome::Kind::Fail:
        return deny(outcome.reasons, evidence, "certificate does not satisfy the security policy");
      case PolicyOutcome::Kind::Grey:
        d.outcome = Outcome::AllowWithObligations;
        d.obligations = derive_obligations(outcome.grey_score, policy, outcome.grey_components);
        d.detail = "grey inspection score " + std::to_string(outcome.grey_score);
        return d;
      case PolicyOutcome::Kind::Pass:
        d.outcome = Outcome::Allow;
        return d;
    }
    return deny({reason::kAttestation}, evidence, "unreachable");
  }();

  if (audit != nullptr) audit->append(decision);
  return decision;
}

// --- verifier ---------------------------------------------------------------------------------

Verifier::Verifier(SecurityPolicy policy, TrustStore trust, DeviceRegistry registry, CertFetcher fetch,
                   AuditLog& audit, std::chrono::seconds nonce_ttl)
    : policy_(std::move(policy)),
      trust_(std::move(trust)),
      registry_(std::move(registry)),
      fetch_(std::move(fetch)),
      audit_(audit),
      nonces_(nonce_ttl) {
  policy_.validate();
}

AttestationResult Verifier::check_quote(const AttestationQuote& quote, const Digest& expected_nonce) {
  AttestationResult result;
  result.device_id = quote.device_id;
  try {
    if (!nonces_.consume(expected_nonce)) {
      throw Error(Errc::NonceMismatch, "challenge nonce unknown, expired or already used");
    }
    result.software = verify_quote(quote, expected_nonce, registry_);
    result.pcr = quote.pcr;
    result.quote_digest = quote_digest(quote);
    result.ok = true;
  } catch (const Error& e) {
    result.ok = false;
    result.error = std::string(e.name()) + ": " + e.what();
  }
  return result;
}

Decision Verifier::admit(const AttestationQuote& quote, const Digest& expected_nonce) {
  auto attestation = check_quote(quote, expected_nonce);
  CertFetchResult fetch;
  if (attestation.ok) {
    try {
      fetch.certificates = fetch_(attestation.software.aggregate);
      fetch.available = true;
    } catch (const std::exception& e) {
      fetch.available = false;
      fetch.error = e.what();
    }
  }
  auto decision = decide_admission(attestation, fetch, policy_, trust_, &audit_);
  spdlog::info("admission {} for '{}': {}", to_string(decision.outcome), quote.device_id,
               decision.reasons.empty() ? std::string("-") : decision.reasons.front());
  return decision;
}

Decision Verifier::reject_session(const std::string& detail) {
  AttestationResult failed;
  failed.error = detail;
  return decide_admission(failed, {}, policy_, trust_, &audit_);
}

// --- daemon ---------------------------------------------------------------------------------

VerifierDaemon::VerifierDaemon(Verifier& verifier, const std::string& host, int port,
                               std::chrono::milliseconds session_timeout)
    : verifier_(verifier), listener_(host, port), timeout_(session_timeout) {}

VerifierDaemon::~VerifierDaemon() { stop(); }

void VerifierDaemon::start() {
  acceptor_ = std::thread([this] { run(); });
}

void VerifierDaemon::run() {
  while (!stopping_) {
    auto sock = listener_.accept();
    if (!sock.valid()) break;
    {
      std::lock_guard lock(sessions_mutex_);
      ++active_sessions_;
    }
    std::thread([this, s = std::move(sock)]() mutable {
      session(std::move(s));
      std::lock_guard lock(sessions_mutex_);
      --active_sessions_;
      sessions_done_.notify_all();
    }).detach();
  }
}

void VerifierDaemon::stop() {
  stopping_ = true;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::unique_lock lock(sessions_mutex_);
  sessions_done_.wait(lock, [this] { return active_sessions_ == 0; });
}

void VerifierDaemon::session(Socket sock) {
  sock.set_timeout(timeout_);
  Decision decision;
  try {
    auto nonce = verifier_.challenge();
    write_frame(sock, challenge_message(nonce));
    AttestationQuote quote;
    try {
      quote = parse_quote_message(read_frame(sock));
    } catch (const Error& e) {
      decision = verifier_.reject_session(std::string(e.name()) + ": " + e.what());
      write_frame(sock, {{"type", "decision"}, {"decision", decision.to_json()}});
      return;
    }
    decision = verifier_.admit(quote, nonce);
    write_frame(sock, {{"type", "decision"}, {"decision", decision.to_json()}});
  } catch (const std::exception& e) {
    spdlog::warn("session aborted: {}", e.what());
  }
}

}  // namespace attestgate
