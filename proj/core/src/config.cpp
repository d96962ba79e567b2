#include "promptopt/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "promptopt/errors.hpp"
#include "promptopt/http_backend.hpp"
#include "promptopt/mock_backend.hpp"

namespace promptopt {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open {} {}", what, path.string()));
    }
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception& ex) {
        throw ConfigError(fmt::format("{} {}: {}", what, path.string(), ex.what()));
    }
}

std::string resolve_path(const std::string& path,
                         const std::filesystem::path& base_dir) {
    std::filesystem::path p(path);
    if (!p.is_absolute()) {
        p = base_dir.empty() ? p : base_dir / p;
    }
    // absolute and normalized, so the path survives being embedded in a
    // trace header and re-read from a different working directory
    return std::filesystem::weakly_canonical(std::filesystem::absolute(p)).string();
}

std::vector<MockRule> rules_from_json(const json& rules, const std::string& where) {
    std::vector<MockRule> out;
    int index = 0;
    for (const auto& r : rules) {
        const std::string path = fmt::format("{}.rules[{}]", where, index++);
        if (!r.contains("match") || !r.at("match").is_string()) {
            throw ConfigError(path + ".match: expected a string");
        }
        const std::string match = r.at("match").get<std::string>();
        if (r.contains("respond")) {
            out.push_back(mock_rule_fixed(match, r.at("respond").get<std::string>()));
        } else if (r.contains("respond_seq")) {
            out.push_back(mock_rule_sequence(
                match, r.at("respond_seq").get<std::vector<std::string>>()));
        } else if (r.contains("respond_seeded")) {
            out.push_back(mock_rule_seeded(
                match, r.at("respond_seeded").get<std::vector<std::string>>()));
        } else {
            throw ConfigError(path +
                              ": expected respond, respond_seq or respond_seeded");
        }
    }
    return out;
}

}  // namespace

BackendConfig backend_config_from_json(const json& doc, const std::string& field_path,
                                       double role_default_temperature,
                                       const std::filesystem::path& base_dir) {
    BackendConfig config;
    if (!doc.is_object()) {
        throw ConfigError(field_path + ": expected an object");
    }
    const std::string kind = doc.value("kind", "");
    if (kind == "http") {
        config.kind = BackendKind::kHttp;
        if (!doc.contains("base_url")) {
            throw ConfigError(field_path + ".base_url: required for http backends");
        }
        config.profile.base_url = doc.at("base_url").get<std::string>();
    } else if (kind == "mock") {
        config.kind = BackendKind::kMock;
    } else {
        throw ConfigError(field_path + ".kind: expected \"http\" or \"mock\"");
    }

    config.profile.model_name = doc.value("model", kind == "mock" ? "mock" : "");
    if (config.profile.model_name.empty()) {
        throw ConfigError(field_path + ".model: required");
    }
    config.profile.api_key_env = doc.value("api_key_env", "");
    config.profile.temperature = doc.value("temperature", role_default_temperature);
    if (config.profile.temperature < 0) {
        throw ConfigError(field_path + ".temperature: must be >= 0");
    }
    if (doc.contains("max_tokens")) {
        config.profile.max_tokens = doc.at("max_tokens").get<int>();
    }
    config.profile.seed = doc.value<std::uint64_t>("seed", 0);
    if (doc.contains("retry")) {
        const json& r = doc.at("retry");
        config.profile.retry.max_attempts = r.value("max_attempts", 3);
        config.profile.retry.initial_backoff =
            std::chrono::milliseconds(r.value("initial_backoff_ms", 500));
        config.profile.retry.backoff_factor = r.value("backoff_factor", 2.0);
        config.profile.retry.max_backoff =
            std::chrono::milliseconds(r.value("max_backoff_ms", 10000));
    }
    if (doc.contains("rate_limit")) {
        const json& r = doc.at("rate_limit");
        config.profile.rate.max_concurrent = r.value("max_concurrent", 4);
        config.profile.rate.requests_per_minute = r.value("requests_per_minute", 0);
    }

    config.strict = doc.value("strict", true);
    if (doc.contains("default")) {
        if (doc.at("default").is_string()) {
            config.default_response = doc.at("default").get<std::string>();
            config.strict = false;
        }
    }
    if (doc.contains("script_file")) {
        config.script_file =
            resolve_path(doc.at("script_file").get<std::string>(), base_dir);
    }
    if (doc.contains("rules")) {
        config.inline_rules = doc.at("rules");
    }
    return config;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::kHttp) {
        return std::make_shared<HttpBackend>(config.profile);
    }
    json rules = config.inline_rules;
    bool strict = config.strict;
    std::optional<std::string> default_response = config.default_response;
    if (config.script_file) {
        const json script = read_json_file(*config.script_file, "mock script");
        if (script.contains("rules")) {
            rules = script.at("rules");
        }
        strict = script.value("strict", strict);
        if (script.contains("default") && script.at("default").is_string()) {
            default_response = script.at("default").get<std::string>();
            strict = false;
        }
    }
    std::vector<MockRule> parsed;
    if (rules.is_array()) {
        parsed = rules_from_json(rules, "mock");
    }
    return std::make_shared<MockBackend>(config.profile, std::move(parsed), strict,
                                         std::move(default_response));
}

RunConfig run_config_from_json(const json& doc,
                               const std::filesystem::path& base_dir) {
    RunConfig config;
    config.raw = doc;
    if (!doc.is_object()) {
        throw ConfigError("config: expected a JSON object");
    }
    if (!doc.contains("task") || !doc.at("task").is_object() ||
        !doc.at("task").contains("manifest")) {
        throw ConfigError("task.manifest: required");
    }
    config.manifest =
        resolve_path(doc.at("task").at("manifest").get<std::string>(), base_dir);
    if (!doc.contains("method")) {
        throw ConfigError("method: required");
    }
    config.method = method_from_string(doc.at("method").get<std::string>());
    if (config.method == Method::kInit || config.method == Method::kManual) {
        throw ConfigError(fmt::format("method: \"{}\" is not runnable",
                                      to_string(config.method)));
    }

    if (doc.contains("beam")) {
        const json& b = doc.at("beam");
        config.beam.initial_size = b.value("initial_size", config.beam.initial_size);
        config.beam.expansion_per_prompt =
            b.value("expansion_per_prompt", config.beam.expansion_per_prompt);
        config.beam.selection_size =
            b.value("selection_size", config.beam.selection_size);
        config.beam.total_steps = b.value("total_steps", config.beam.total_steps);
        config.beam.error_sample_k =
            b.value("error_sample_k", config.beam.error_sample_k);
    }
    config.beam.seed = doc.value<std::uint64_t>("seed", 0);
    config.beam.validate();

    if (!doc.contains("optimizer")) {
        throw ConfigError("optimizer: required");
    }
    config.optimizer =
        backend_config_from_json(doc.at("optimizer"), "optimizer", 0.9, base_dir);
    if (!doc.contains("target")) {
        throw ConfigError("target: required");
    }
    config.target = backend_config_from_json(doc.at("target"), "target", 0.0, base_dir);
    if (doc.contains("judge")) {
        config.judge =
            backend_config_from_json(doc.at("judge"), "judge", 0.0, base_dir);
    }

    config.pseudo = doc.value("pseudo", false);
    config.test_best_only = doc.value("test_eval", std::string("all")) == "best";
    if (doc.contains("following")) {
        config.keyword_case_sensitive =
            doc.at("following").value("keyword_case_sensitive", true);
    }
    if (doc.contains("transcript")) {
        config.transcript = resolve_path(doc.at("transcript").get<std::string>(),
                                         base_dir);
    }
    config.out_dir = resolve_path(doc.value("out_dir", "out"), base_dir);

    // the raw document travels inside trace headers, where the original
    // base directory is lost; persist the resolved paths
    config.raw["task"]["manifest"] = config.manifest;
    auto patch_script = [&](const char* key, const BackendConfig& backend) {
        if (backend.script_file && config.raw.contains(key)) {
            config.raw[key]["script_file"] = *backend.script_file;
        }
    };
    patch_script("optimizer", config.optimizer);
    patch_script("target", config.target);
    if (config.judge) {
        patch_script("judge", *config.judge);
    }
    if (config.transcript) {
        config.raw["transcript"] = *config.transcript;
    }
    config.raw["out_dir"] = config.out_dir;
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const json doc = read_json_file(path, "config");
    return run_config_from_json(doc, path.parent_path());
}

}  // namespace promptopt
