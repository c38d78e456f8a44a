#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgexpo/core.hpp"
#include "fgexpo/eval.hpp"
#include "fgexpo/gcs.hpp"
#include "fgexpo/testbed.hpp"
#include "fgexpo/trainer.hpp"

namespace fgexpo {

using nlohmann::json;

class FileNotFound : public std::runtime_error {
 public:
  explicit FileNotFound(const std::filesystem::path& p)
      : std::runtime_error("file not found: " + p.string()) {}
};

/// Malformed artifact (bad JSON, wrong schema, bad CSV row).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

json to_json(const TrainConfig& cfg);
/// Keys are exactly the TrainConfig field names; absent keys keep their
/// defaults, unknown keys are a ConfigError. The result is validated.
TrainConfig config_from_json(const json& j);

json to_json(const PolicyParams& params);
PolicyParams params_from_json(const json& j);

/// Bank document: {"F","L","V","questions":[{"id","features","target"}...]}
/// plus "init_policy" when an initial policy is bundled.
json to_json(const QuestionBank& bank, const PolicyParams* init = nullptr);
GeneratedBank bank_from_json(const json& j);

json to_json(const BankSpec& spec);

/// StepRecord without wall-clock time, so reruns serialize identically.
json to_json(const StepRecord& rec);
json to_json(const EvalReport& report);

/// {"version": ..., "config": ...}
json provenance(const TrainConfig& cfg);

json read_json_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& text);

/// Curriculum trace CSV. Leading '#' lines carry provenance.
std::string curriculum_csv_header();
std::string curriculum_csv_row(const CurriculumTraceRow& row);
std::vector<CurriculumTraceRow> parse_curriculum_csv(std::istream& in);

std::string eval_csv(const EvalReport& report, const TrainConfig& cfg);

}  // namespace fgexpo
