#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "promptopt/backend.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

enum class BackendKind { kHttp, kMock };

struct BackendConfig {
    BackendKind kind = BackendKind::kMock;
    BackendProfile profile;
    // mock-only
    bool strict = true;
    std::optional<std::string> default_response;
    std::optional<std::string> script_file;  // rules loaded from this JSON file
    nlohmann::json inline_rules;             // or carried inline
};

struct RunConfig {
    std::string manifest;
    Method method = Method::kApe;
    BeamConfig beam;
    BackendConfig optimizer;
    BackendConfig target;
    std::optional<BackendConfig> judge;
    bool pseudo = false;
    bool test_best_only = false;
    bool keyword_case_sensitive = true;
    std::optional<std::string> transcript;
    std::string out_dir = "out";

    nlohmann::json raw;  // the resolved document, embedded into trace headers
};

/// Parses and validates a run configuration. Errors name the offending
/// field path ("target.kind: ...").
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir);

/// Instantiates a backend (HTTP client or scripted mock) from its config.
/// `role_default_temperature` applies when the config omits temperature:
/// 0.9 for the optimizer role, 0 for target and judge.
std::shared_ptr<Backend> make_backend(const BackendConfig& config);

BackendConfig backend_config_from_json(const nlohmann::json& doc,
                                       const std::string& field_path,
                                       double role_default_temperature,
                                       const std::filesystem::path& base_dir);

}  // namespace promptopt
