#include "fgexpo/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace fgexpo {

namespace {

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "group_size",      "batch_size",     "base_kl_coeff", "clip_threshold",
      "ema_factor",      "curriculum_mean", "curriculum_std", "adv_eps",
      "learning_rate",   "total_steps",    "seed",          "rho_variant",
      "sampler_variant", "sampling_temperature"};
  return keys;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field ") + key + ": " + e.what());
  }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("bad number in CSV: '" + s + "'");
  return v;
}

long parse_long(const std::string& s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("bad integer in CSV: '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf.data(), ptr);
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["group_size"] = cfg.group_size;
  j["batch_size"] = cfg.batch_size;
  j["base_kl_coeff"] = cfg.base_kl_coeff;
  j["clip_threshold"] = cfg.clip_threshold;
  j["ema_factor"] = cfg.ema_factor;
  j["curriculum_mean"] = cfg.curriculum_mean;
  j["curriculum_std"] = cfg.curriculum_std;
  j["adv_eps"] = cfg.adv_eps;
  j["learning_rate"] = cfg.learning_rate;
  j["total_steps"] = cfg.total_steps;
  j["seed"] = cfg.seed;
  if (cfg.rho_variant.kind == RhoKind::kTanhShifted)
    j["rho_variant"] = "tanh_shifted";
  else
    j["rho_variant"] = json{{"constant", cfg.rho_variant.constant}};
  j["sampler_variant"] =
      cfg.sampler_variant == SamplerVariant::kGaussianCurriculum ? "gaussian_curriculum" : "uniform";
  j["sampling_temperature"] = cfg.sampling_temperature;
  return j;
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!config_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");

  TrainConfig cfg;
  read_field(j, "group_size", cfg.group_size);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "base_kl_coeff", cfg.base_kl_coeff);
  read_field(j, "clip_threshold", cfg.clip_threshold);
  read_field(j, "ema_factor", cfg.ema_factor);
  read_field(j, "curriculum_mean", cfg.curriculum_mean);
  read_field(j, "curriculum_std", cfg.curriculum_std);
  read_field(j, "adv_eps", cfg.adv_eps);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "total_steps", cfg.total_steps);
  read_field(j, "seed", cfg.seed);
  read_field(j, "sampling_temperature", cfg.sampling_temperature);

  if (j.contains("rho_variant")) {
    const auto& r = j.at("rho_variant");
    if (r.is_string() && r.get<std::string>() == "tanh_shifted") {
      cfg.rho_variant = RhoVariant::tanh_shifted();
    } else if (r.is_object() && r.size() == 1 && r.contains("constant") && r.at("constant").is_number()) {
      cfg.rho_variant = RhoVariant::constant_value(r.at("constant").get<double>());
    } else {
      throw ConfigError("rho_variant must be \"tanh_shifted\" or {\"constant\": c}");
    }
  }
  if (j.contains("sampler_variant")) {
    const auto& s = j.at("sampler_variant");
    if (s == "gaussian_curriculum")
      cfg.sampler_variant = SamplerVariant::kGaussianCurriculum;
    else if (s == "uniform")
      cfg.sampler_variant = SamplerVariant::kUniform;
    else
      throw ConfigError("sampler_variant must be \"gaussian_curriculum\" or \"uniform\"");
  }
  return validate_config(cfg);
}

json to_json(const PolicyParams& params) {
  json theta = json::array();
  for (const auto& m : params.theta) theta.push_back(matrix_to_json(m));
  return {{"L", params.length()},
          {"V", params.vocab()},
          {"F", params.features()},
          {"temperature", params.temperature},
          {"theta", std::move(theta)}};
}

PolicyParams params_from_json(const json& j) {
  try {
    const int L = j.at("L").get<int>();
    const int V = j.at("V").get<int>();
    const int F = j.at("F").get<int>();
    PolicyParams p = PolicyParams::zeros(L, V, F, j.at("temperature").get<double>());
    const auto& theta = j.at("theta");
    if (!theta.is_array() || static_cast<int>(theta.size()) != L) throw FormatError("theta must hold L matrices");
    for (int t = 0; t < L; ++t) {
      const auto& rows = theta[static_cast<std::size_t>(t)];
      if (static_cast<int>(rows.size()) != V) throw FormatError("theta matrix must have V rows");
      for (int v = 0; v < V; ++v) {
        const auto& row = rows[static_cast<std::size_t>(v)];
        if (static_cast<int>(row.size()) != F) throw FormatError("theta row must have F entries");
        for (int f = 0; f < F; ++f) p.theta[static_cast<std::size_t>(t)](v, f) = row[static_cast<std::size_t>(f)].get<double>();
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad policy document: ") + e.what());
  }
}

json to_json(const QuestionBank& bank, const PolicyParams* init) {
  json qs = json::array();
  for (const auto& q : bank.questions()) {
    json features = json::array();
    for (Eigen::Index f = 0; f < q.features.size(); ++f) features.push_back(q.features[f]);
    qs.push_back({{"id", q.id}, {"features", std::move(features)}, {"target", q.target}});
  }
  json j = {{"F", bank.features()}, {"L", bank.length()}, {"V", bank.vocab()}, {"questions", std::move(qs)}};
  if (init) j["init_policy"] = to_json(*init);
  return j;
}

GeneratedBank bank_from_json(const json& j) {
  try {
    const int F = j.at("F").get<int>();
    const int L = j.at("L").get<int>();
    const int V = j.at("V").get<int>();
    std::vector<Question> questions;
    for (const auto& jq : j.at("questions")) {
      Question q;
      q.id = jq.at("id").get<QuestionId>();
      const auto feats = jq.at("features").get<std::vector<double>>();
      q.features = Eigen::Map<const Eigen::VectorXd>(feats.data(), static_cast<Eigen::Index>(feats.size()));
      q.target = jq.at("target").get<std::vector<int>>();
      questions.push_back(std::move(q));
    }
    QuestionBank bank(std::move(questions), F, L, V);
    PolicyParams init = j.contains("init_policy") ? params_from_json(j.at("init_policy"))
                                                  : PolicyParams::zeros(L, V, F);
    init.check_compatible(bank);
    return {std::move(bank), std::move(init)};
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad bank document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad bank document: ") + e.what());
  }
}

json to_json(const BankSpec& spec) {
  return {{"n", spec.n},
          {"features", spec.features},
          {"length", spec.length},
          {"vocab", spec.vocab},
          {"difficulty_spread", spec.difficulty_spread}};
}

json to_json(const StepRecord& rec) {
  return {{"step", rec.step},
          {"sampled", rec.sampled},
          {"batch_accuracy", rec.batch_accuracy.value()},
          {"n_rollouts", rec.batch_accuracy.n_rollouts()},
          {"beta_eff", rec.beta_eff},
          {"surrogate", rec.objective.surrogate},
          {"kl_estimate", rec.objective.kl_estimate},
          {"beta_eff_used", rec.objective.beta_eff_used},
          {"total", rec.objective.total},
          {"mean_abs_advantage", rec.mean_abs_advantage},
          {"pass_rates", rec.pass_rates}};
}

json to_json(const EvalReport& report) {
  json qs = json::array();
  for (std::size_t i = 0; i < report.question_ids.size(); ++i)
    qs.push_back({{"id", report.question_ids[i]},
                  {"rewards", report.rewards[i]},
                  {"pass1", report.pass1[i]},
                  {"passk", report.passk[i]}});
  return {{"k", report.k},
          {"temperature", report.temperature},
          {"mean_pass1", report.mean_pass1},
          {"mean_passk", report.mean_passk},
          {"exploration_gap", exploration_gap(report)},
          {"questions", std::move(qs)}};
}

json provenance(const TrainConfig& cfg) {
  return {{"version", std::string(kVersion)}, {"config", to_json(cfg)}};
}

json read_json_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw FileNotFound(p);
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::string curriculum_csv_header() {
  return "step,question_id,p_emp,p_tilde_after,weight,sampled_flag";
}

std::string curriculum_csv_row(const CurriculumTraceRow& row) {
  std::string s = std::to_string(row.step) + "," + std::to_string(row.question_id) + ",";
  if (row.p_emp) s += format_double(*row.p_emp);
  s += "," + format_double(row.p_tilde_after) + "," + format_double(row.weight) + "," +
       (row.sampled ? "1" : "0");
  return s;
}

std::vector<CurriculumTraceRow> parse_curriculum_csv(std::istream& in) {
  std::vector<CurriculumTraceRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != curriculum_csv_header()) throw FormatError("unexpected curriculum CSV header: " + line);
      header_seen = true;
      continue;
    }
    const auto cols = split_csv(line);
    if (cols.size() != 6) throw FormatError("curriculum CSV row needs 6 columns: " + line);
    CurriculumTraceRow r;
    r.step = parse_long(cols[0]);
    r.question_id = parse_long(cols[1]);
    if (!cols[2].empty()) r.p_emp = parse_double(cols[2]);
    r.p_tilde_after = parse_double(cols[3]);
    r.weight = parse_double(cols[4]);
    if (cols[5] != "0" && cols[5] != "1") throw FormatError("sampled_flag must be 0 or 1");
    r.sampled = cols[5] == "1";
    rows.push_back(r);
  }
  if (!header_seen) throw FormatError("curriculum CSV has no header");
  return rows;
}

std::string eval_csv(const EvalReport& report, const TrainConfig& cfg) {
  std::string s = "# " + provenance(cfg).dump() + "\n";
  s += "question_id,pass1,passk\n";
  for (std::size_t i = 0; i < report.question_ids.size(); ++i)
    s += std::to_string(report.question_ids[i]) + "," + format_double(report.pass1[i]) + "," +
         format_double(report.passk[i]) + "\n";
  return s;
}

}  // namespace fgexpo
