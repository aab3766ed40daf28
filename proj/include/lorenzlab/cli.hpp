#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorenzlab/flow_models.hpp"
#include "lorenzlab/integrator.hpp"

namespace lorenzlab::cli {

inline constexpr const char* kToolName = "lorenzlab";
inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::json;

/// Every recognised key with its default. Keys whose default is null accept
/// any value (null means "derive from the model").
Json default_config();

/// defaults <- file <- --set overrides <- --seed/--out. Unknown keys, type
/// mismatches and unreadable files raise ConfigError naming the key or path.
Json resolve_config(const std::optional<std::string>& path,
                    const std::vector<std::string>& overrides,
                    const std::optional<std::uint64_t>& seed,
                    const std::optional<std::string>& out_dir);

/// Applies one dotted-key=value override in place.
void apply_override(Json& config, const std::string& assignment);

/// Builds the model and writes the derived values back into `section`.
FlowModel build_model(Json& section);
StepConfig build_step_config(const Json& section);

const std::vector<std::string>& subcommands();

/// Entry point; returns the process exit status (0 ok, 1 domain error,
/// 2 configuration or usage error).
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lorenzlab::cli
