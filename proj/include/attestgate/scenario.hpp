#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>

#include "attestgate/model.hpp"

namespace attestgate {

enum class FixtureKind { Clean, Grey, Backdoor };

FixtureKind fixture_kind_from_string(std::string_view s);

/// Seeded synthetic firmware: every component gets random printable content
/// and a control-flow sidecar. Clean bundles guard every privileged node
/// behind an auth check; grey bundles add a static-data comparison that
/// exclusively guards half of one component's graph; backdoor bundles add an
/// unguarded privileged path and a hard-coded credential.
FirmwareBundle generate_bundle(FixtureKind kind, std::size_t components, const std::string& device_class,
                               std::mt19937_64& rng);

/// Runs a scenario document end to end over loopback: in-process
/// certificate server and verifier daemon, one prover session per device.
/// Returns {scenario, seed, results:[{device, expected, actual, pass}], pass}.
/// Throws Errc::ScenarioParseError for malformed scenarios; relative bundle
/// paths resolve against `base_dir`.
Json run_scenario(const Json& scenario, const std::filesystem::path& base_dir = ".");

Json run_scenario_file(const std::filesystem::path& path);

}  // namespace attestgate
