#include "attestgate/cert_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>

#include "attestgate/error.hpp"

namespace attestgate {

namespace fs = std::filesystem;

namespace {

void sort_newest_first(std::vector<SignedCertificate>& certs) {
  std::sort(certs.begin(), certs.end(), [](const auto& a, const auto& b) {
    if (a.body.issued_at != b.body.issued_at) return a.body.issued_at > b.body.issued_at;
    return a.body_digest < b.body_digest;
  });
}

void write_all_synced(std::FILE* f, const std::string& data) {
  if (std::fwrite(data.data(), 1, data.size(), f) != data.size() || std::fflush(f) != 0 ||
      ::fsync(::fileno(f)) != 0) {
    throw Error(Errc::StorageFailure, "journal write failed");
  }
}

void sync_directory(const fs::path& dir) {
  int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

CertificateStore::CertificateStore(fs::path journal, TrustStore trust)
    : path_(std::move(journal)), trust_(std::move(trust)) {
  std::vector<SignedCertificate> ordered;
  if (fs::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t line_no = 0;
    for (std::size_t pos = 0; pos < text.size();) {
      auto end = text.find('\n', pos);
      bool terminated = end != std::string::npos;
      std::string line = text.substr(pos, terminated ? end - pos : std::string::npos);
      pos = terminated ? end + 1 : text.size();
      ++line_no;
      if (line.empty()) continue;
      SignedCertificate cert;
      try {
        cert = parse_certificate(line);
      } catch (const Error& e) {
        if (!terminated) {
          // A write cut short by a crash; it was never acknowledged.
          spdlog::warn("dropping torn final journal record {}", line_no);
          break;
        }
        throw Error(Errc::CorruptStore, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      try {
        verify_certificate(cert, trust_);
      } catch (const Error& e) {
        spdlog::warn("journal record {} no longer verifies ({}); not served", line_no, e.what());
        unverifiable_.push_back(line);
        continue;
      }
      if (seen_.emplace(cert.body_digest, cert.body.software_digest.aggregate).second) {
        by_aggregate_[cert.body.software_digest.aggregate].push_back(cert);
        ordered.push_back(std::move(cert));
      }
    }
  }
  for (auto& [digest, certs] : by_aggregate_) sort_newest_first(certs);

  // Compaction: rewrite deduplicated journal atomically.
  auto tmp = path_;
  tmp += ".compact";
  {
    std::FILE* out = std::fopen(tmp.c_str(), "wb");
    if (out == nullptr) throw Error(Errc::StorageFailure, "cannot write " + tmp.string());
    std::string data;
    for (const auto& cert : ordered) data += canonical_encode(Json(cert)) + "\n";
    for (const auto& raw : unverifiable_) data += raw + "\n";
    try {
      write_all_synced(out, data);
    } catch (...) {
      std::fclose(out);
      throw;
    }
    std::fclose(out);
  }
  std::error_code ec;
  fs::rename(tmp, path_, ec);
  if (ec) throw Error(Errc::StorageFailure, "cannot replace journal: " + ec.message());
  sync_directory(path_.parent_path());

  journal_ = std::fopen(path_.c_str(), "ab");
  if (journal_ == nullptr) throw Error(Errc::StorageFailure, "cannot open journal " + path_.string());
  spdlog::info("certificate store loaded: {} certificate(s) from {}", ordered.size(), path_.string());
}

CertificateStore::~CertificateStore() {
  if (journal_ != nullptr) std::fclose(journal_);
}

void CertificateStore::append_line(const std::string& line) { write_all_synced(journal_, line + "\n"); }

PutStatus CertificateStore::put(const SignedCertificate& cert) {
  verify_certificate(cert, trust_);
  std::unique_lock lock(mutex_);
  if (seen_.contains(cert.body_digest)) return PutStatus::Duplicate;
  append_line(canonical_encode(Json(cert)));
  const auto& aggregate = cert.body.software_digest.aggregate;
  seen_.emplace(cert.body_digest, aggregate);
  auto& bucket = by_aggregate_[aggregate];
  bucket.push_back(cert);
  sort_newest_first(bucket);
  return PutStatus::Stored;
}

std::vector<SignedCertificate> CertificateStore::get(const Digest& aggregate) const {
  std::shared_lock lock(mutex_);
  auto it = by_aggregate_.find(aggregate);
  if (it == by_aggregate_.end()) return {};
  return it->second;
}

std::size_t CertificateStore::size() const {
  std::shared_lock lock(mutex_);
  return seen_.size();
}

void CertificateStore::flush() {
  std::unique_lock lock(mutex_);
  if (std::fflush(journal_) != 0 || ::fsync(::fileno(journal_)) != 0) {
    throw Error(Errc::StorageFailure, "journal flush failed");
  }
}

}  // namespace attestgate
