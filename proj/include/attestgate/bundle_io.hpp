#pragma once

#include <filesystem>

#include "attestgate/model.hpp"

namespace attestgate {

enum class BundleFormat { Auto, Directory, Inline };

/// Directory form: `manifest.json` listing components by relative file path
/// (plus optional `supplier` and `cfg` sidecar path). Inline form: one JSON
/// document with `content_base64` and an inline `cfg` object per component.
/// Auto picks Directory for directories and Inline for files.
/// Throws Errc::ParseError on missing files or malformed documents.
FirmwareBundle load_bundle(const std::filesystem::path& path, BundleFormat format = BundleFormat::Auto);

FirmwareBundle bundle_from_inline_json(const Json& j);
Json bundle_to_inline_json(const FirmwareBundle& bundle);

/// Writes the directory form (manifest, component files, cfg sidecars).
void write_bundle_dir(const FirmwareBundle& bundle, const std::filesystem::path& dir);

}  // namespace attestgate
