// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mmjoin/costmodel.hpp"
#include "mmjoin/engine.hpp"
#include "mmjoin/optimizer.hpp"
#include "mmjoin/querymodel.hpp"

namespace mmjoin {

inline constexpr int kSchemaVersion = 1;

using ojson = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// `{"relations":[{"alias","base"}|"name"...], "edges":[{"left","left_attr","right","right_attr"}], "driver"}`
ojson query_to_json(const QuerySpec& q);
QuerySpec parse_query_json(const nlohmann::json& j);
QuerySpec load_query(const std::filesystem::path& path);

/// `{"driver","order":[...],"strategy"}`, optionally with "child_order".
ojson plan_to_json(const Plan& p);
Plan parse_plan_json(const nlohmann::json& j);
ojson sj_plan_to_json(const SJPlan& p);
SJPlan parse_sj_plan_json(const nlohmann::json& j);

ojson weights_to_json(const Weights& w);
Weights parse_weights_json(const nlohmann::json& j, Weights base = {});

ojson cost_to_json(const CostBreakdown& b, const JoinTree& tree);
ojson exec_to_json(const ResultSummary& r, const JoinTree& tree);
ojson opt_to_json(const OptResult& r, const JoinTree& tree);

}  // namespace mmjoin
