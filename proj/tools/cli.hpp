/********************************************************************************
* Copyright 2026 The DFPN Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dfpn/data.hpp"
#include "dfpn/inference.hpp"
#include "dfpn/trainer.hpp"

namespace dfpn::cli {

inline const std::vector<std::string> kCommands{"train", "eval", "infer", "bench", "make-data"};

struct OptionSpec {
    std::string key;
    std::string default_value;
    std::string help;
};

/// Every setting accepted as a `--key` flag or a `key = value` config line.
const std::vector<OptionSpec>& option_specs();

enum class Source { Default, File, Flag };
std::string to_string(Source source);

struct Setting {
    std::string value;
    Source source = Source::Default;
};

/// Ordered like option_specs().
using Settings = std::vector<std::pair<std::string, Setting>>;

/// Flag > config file > default. Keys may use '-' or '_'. Throws
/// std::invalid_argument on an unknown key.
Settings resolve_settings(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& flag_values);

struct RunConfig {
    std::string command;
    std::filesystem::path manifest;
    std::filesystem::path data;
    std::filesystem::path checkpoint;
    std::filesystem::path resume;
    std::filesystem::path detections;
    std::filesystem::path anchors_csv;
    std::filesystem::path out;

    SyntheticConfig synthetic;
    std::size_t synthetic_count = 0;
    std::size_t synthetic_first = 0;

    std::uint64_t seed = 0;
    TrainConfig train;
    InferenceConfig inference;
    std::size_t warmup = 0;
    std::size_t frames = 0;
};

/// Converts and validates settings, including that referenced input paths
/// exist. Throws std::invalid_argument with the offending key.
RunConfig to_run_config(const std::string& command, const Settings& settings);

/// One `key = value  (source)` line per setting.
std::string banner(const std::string& command, const Settings& settings);

/// Entry point. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dfpn::cli
