#include "attestgate/bundle_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "attestgate/error.hpp"

namespace attestgate {

namespace fs = std::filesystem;

namespace {

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Json read_json(const fs::path& path) {
  auto raw = read_file(path);
  try {
    return Json::parse(raw.begin(), raw.end());
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

void read_header(const Json& j, FirmwareBundle& bundle) {
  bundle.name = j.at("name").get<std::string>();
  bundle.version = j.at("version").get<std::string>();
  bundle.device_class = j.at("device_class").get<std::string>();
}

FirmwareBundle load_directory(const fs::path& dir) {
  auto manifest = read_json(dir / "manifest.json");
  FirmwareBundle bundle;
  try {
    read_header(manifest, bundle);
    for (const auto& entry : manifest.at("components")) {
      Component c(entry.at("name").get<std::string>(),
                  read_file(dir / entry.at("path").get<std::string>()));
      if (entry.contains("supplier")) c.supplier = entry.at("supplier").get<std::string>();
      if (entry.contains("cfg")) {
        c.cfg = read_json(dir / entry.at("cfg").get<std::string>()).get<ControlFlowGraph>();
      }
      bundle.components.push_back(std::move(c));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, "manifest: " + std::string(e.what()));
  }
  check_unique_names(bundle);
  return bundle;
}

}  // namespace

FirmwareBundle bundle_from_inline_json(const Json& j) {
  FirmwareBundle bundle;
  try {
    read_header(j, bundle);
    for (const auto& entry : j.at("components")) {
      Component c(entry.at("name").get<std::string>(),
                  base64_decode(entry.at("content_base64").get<std::string>()));
      if (entry.contains("supplier")) c.supplier = entry.at("supplier").get<std::string>();
      if (entry.contains("cfg")) c.cfg = entry.at("cfg").get<ControlFlowGraph>();
      bundle.components.push_back(std::move(c));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, "inline bundle: " + std::string(e.what()));
  }
  check_unique_names(bundle);
  return bundle;
}

Json bundle_to_inline_json(const FirmwareBundle& bundle) {
  Json components = Json::array();
  for (const auto& c : bundle.components) {
    Json entry{{"name", c.name}, {"content_base64", base64_encode(c.content())}};
    if (c.supplier) entry["supplier"] = *c.supplier;
    if (c.cfg) entry["cfg"] = *c.cfg;
    components.push_back(std::move(entry));
  }
  return {{"name", bundle.name},
          {"version", bundle.version},
          {"device_class", bundle.device_class},
          {"components", components}};
}

FirmwareBundle load_bundle(const fs::path& path, BundleFormat format) {
  if (format == BundleFormat::Auto) {
    format = fs::is_directory(path) ? BundleFormat::Directory : BundleFormat::Inline;
  }
  if (format == BundleFormat::Directory) return load_directory(path);
  return bundle_from_inline_json(read_json(path));
}

void write_bundle_dir(const FirmwareBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  Json components = Json::array();
  for (std::size_t i = 0; i < bundle.components.size(); ++i) {
    const auto& c = bundle.components[i];
    auto file = "c" + std::to_string(i) + ".bin";
    write_file(dir / file, c.content());
    Json entry{{"name", c.name}, {"path", file}};
    if (c.supplier) entry["supplier"] = *c.supplier;
    if (c.cfg) {
      auto sidecar = "c" + std::to_string(i) + ".cfg.json";
      write_file(dir / sidecar, as_bytes(Json(*c.cfg).dump(2)));
      entry["cfg"] = sidecar;
    }
    components.push_back(std::move(entry));
  }
  Json manifest{{"name", bundle.name},
                {"version", bundle.version},
                {"device_class", bundle.device_class},
                {"components", components}};
  write_file(dir / "manifest.json", as_bytes(manifest.dump(2)));
}

}  // namespace attestgate
