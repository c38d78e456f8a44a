#include "fgexpo/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fgexpo/akl.hpp"
#include "fgexpo/eval.hpp"
#include "fgexpo/gcs.hpp"
#include "fgexpo/io.hpp"
#include "fgexpo/trainer.hpp"

namespace fgexpo {

namespace fs = std::filesystem;

namespace {

class OutputNotEmpty : public std::runtime_error {
 public:
  explicit OutputNotEmpty(const fs::path& p)
      : std::runtime_error("output directory exists and is not empty: " + p.string()) {}
};

constexpr std::array<std::pair<Command, std::string_view>, 6> kCommandNames{{
    {Command::kGenBank, "gen-bank"},
    {Command::kTrain, "train"},
    {Command::kEval, "eval"},
    {Command::kAblate, "ablate"},
    {Command::kTraceCurriculum, "trace-curriculum"},
    {Command::kCompare, "compare"},
}};

void prepare_out(const fs::path& dir) {
  if (dir.empty()) throw std::invalid_argument("--out is required");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir) || !fs::is_empty(dir)) throw OutputNotEmpty(dir);
    return;
  }
  fs::create_directories(dir);
}

TrainConfig load_config(const ExperimentManifest& m) {
  TrainConfig cfg = m.config ? config_from_json(read_json_file(*m.config)) : validate_config({});
  if (m.seed) cfg.seed = *m.seed;
  return cfg;
}

GeneratedBank load_bank(const ExperimentManifest& m) {
  if (m.bank) return bank_from_json(read_json_file(*m.bank));
  RandomStream rng = seeded_rng(m.bank_seed, "bank");
  return generate_bank(m.generation, rng);
}

std::string dump_doc(json j) { return j.dump(2) + "\n"; }

void check_run(const TrainConfig& cfg, const RunResult& run) {
  if (static_cast<long>(run.steps.size()) != cfg.total_steps)
    throw InvariantViolation("step record count differs from total_steps");
  const RhoFunction rho(cfg.rho_variant);
  for (const auto& s : run.steps) {
    if (s.beta_eff != beta_effective(cfg.base_kl_coeff, s.batch_accuracy, rho))
      throw InvariantViolation("beta_eff is not reproducible from the step record");
    if (s.objective.total != s.objective.surrogate - s.objective.beta_eff_used * s.objective.kl_estimate)
      throw InvariantViolation("objective breakdown does not add up");
    if (s.objective.kl_estimate < 0.0) throw InvariantViolation("negative KL estimate");
  }
}

void check_report(const EvalReport& r) {
  for (std::size_t i = 0; i < r.pass1.size(); ++i)
    if (r.passk[i] < r.pass1[i]) throw InvariantViolation("pass@k below pass@1");
}

// Trains and writes metrics.jsonl, curriculum.csv and final_params.json into dir.
RunResult train_into(const fs::path& dir, const TrainConfig& cfg, const GeneratedBank& gb) {
  const json prov = provenance(cfg);
  std::string curriculum = "# " + prov.dump() + "\n" + curriculum_csv_header() + "\n";
  std::string metrics = json{{"kind", "header"}, {"version", prov["version"]}, {"config", prov["config"]}}.dump() + "\n";

  RunResult run = train(cfg, gb.bank, gb.init, [&](const StepTrace& tr) {
    for (const auto& row : curriculum_trace_rows(tr.record.step, tr.weights, tr.table_after, tr.groups))
      curriculum += curriculum_csv_row(row) + "\n";
  });
  check_run(cfg, run);
  for (const auto& s : run.steps) metrics += to_json(s).dump() + "\n";

  fs::create_directories(dir);
  write_text_file(dir / "metrics.jsonl", metrics);
  write_text_file(dir / "curriculum.csv", curriculum);
  json params = provenance(cfg);
  params["policy"] = to_json(run.final_params);
  write_text_file(dir / "final_params.json", dump_doc(params));
  return run;
}

EvalReport eval_into(const fs::path& dir, const TrainConfig& cfg, const PolicyParams& params,
                     const QuestionBank& bank, int k, double temperature) {
  const EvalReport report = evaluate(params, bank, k, temperature, seeded_rng(cfg.seed, "eval"));
  check_report(report);
  json doc = provenance(cfg);
  doc["report"] = to_json(report);
  fs::create_directories(dir);
  write_text_file(dir / "eval_report.json", dump_doc(doc));
  write_text_file(dir / "eval_summary.csv", eval_csv(report, cfg));
  return report;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean_of(const std::vector<StepRecord>& steps, double (*field)(const StepRecord&)) {
  if (steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : steps) s += field(r);
  return s / static_cast<double>(steps.size());
}

struct MethodRun {
  std::string_view name;
  TrainConfig cfg;
};

std::array<MethodRun, 4> methods_for(const TrainConfig& cfg) {
  const AblationConfigs c = ablation_configs(cfg);
  return {{{"grpo", c.grpo}, {"akl_only", c.akl_only}, {"gcs_only", c.gcs_only}, {"full", c.full}}};
}

int cmd_gen_bank(const ExperimentManifest& m, std::ostream& log) {
  const TrainConfig cfg = load_config(m);
  RandomStream rng = seeded_rng(m.bank_seed, "bank");
  const GeneratedBank gb = generate_bank(m.generation, rng);
  prepare_out(m.out);
  json doc = to_json(gb.bank, &gb.init);
  doc["provenance"] = provenance(cfg);
  doc["generation"] = to_json(m.generation);
  doc["generation"]["bank_seed"] = m.bank_seed;
  write_text_file(m.out / "bank.json", dump_doc(doc));
  log << "wrote " << gb.bank.size() << " questions to " << (m.out / "bank.json").string() << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentManifest& m, std::ostream& log) {
  const TrainConfig cfg = load_config(m);
  const GeneratedBank gb = load_bank(m);
  prepare_out(m.out);
  const RunResult run = train_into(m.out, cfg, gb);
  if (!run.steps.empty()) {
    const auto& last = run.steps.back();
    log << "trained " << run.steps.size() << " steps; last batch accuracy "
        << last.batch_accuracy.value() << ", beta_eff " << last.beta_eff << "\n";
  }
  return kExitOk;
}

int cmd_eval(const ExperimentManifest& m, std::ostream& log) {
  const TrainConfig cfg = load_config(m);
  const GeneratedBank gb = load_bank(m);
  PolicyParams params = gb.init;
  if (m.params) {
    const json doc = read_json_file(*m.params);
    params = params_from_json(doc.contains("policy") ? doc.at("policy") : doc);
  }
  prepare_out(m.out);
  const EvalReport r = eval_into(m.out, cfg, params, gb.bank, m.k, m.eval_temperature);
  log << "pass@1 " << r.mean_pass1 << "  pass@" << r.k << " " << r.mean_passk << "  gap "
      << exploration_gap(r) << "\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentManifest& m, std::ostream& log) {
  const TrainConfig cfg = load_config(m);
  const GeneratedBank gb = load_bank(m);
  prepare_out(m.out);

  std::string table = "# " + provenance(cfg).dump() + "\n";
  table += "method,mean_batch_accuracy,mean_beta_eff,mean_abs_advantage,pass1,passk,exploration_gap\n";
  for (const auto& [name, mcfg] : methods_for(cfg)) {
    const fs::path dir = m.out / std::string(name);
    const RunResult run = train_into(dir, mcfg, gb);
    const EvalReport r = eval_into(dir, mcfg, run.final_params, gb.bank, m.k, m.eval_temperature);
    table += std::string(name) + "," +
             format_double(mean_of(run.steps, [](const StepRecord& s) { return s.batch_accuracy.value(); })) + "," +
             format_double(mean_of(run.steps, [](const StepRecord& s) { return s.beta_eff; })) + "," +
             format_double(mean_of(run.steps, [](const StepRecord& s) { return s.mean_abs_advantage; })) + "," +
             format_double(r.mean_pass1) + "," + format_double(r.mean_passk) + "," +
             format_double(exploration_gap(r)) + "\n";
    log << name << ": pass@1 " << r.mean_pass1 << "  pass@" << r.k << " " << r.mean_passk << "\n";
  }
  write_text_file(m.out / "ablation_summary.csv", table);
  return kExitOk;
}

int cmd_trace(const ExperimentManifest& m, std::ostream& log) {
  if (!m.trace) throw std::invalid_argument("trace-curriculum needs --trace PATH");
  if (!fs::is_regular_file(*m.trace)) throw FileNotFound(*m.trace);
  std::ifstream in(*m.trace);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  const auto rows = parse_curriculum_csv(in);
  prepare_out(m.out);

  std::map<long, std::vector<CurriculumTraceRow>> by_step;
  for (const auto& r : rows) by_step[r.step].push_back(r);

  // Provenance of the source trace is carried over verbatim.
  std::string out = first.starts_with("#") ? first + "\n" : std::string();
  out += "# source=" + m.trace->filename().string() + " version=" + std::string(kVersion) + "\n";
  out += "step,n_questions,n_sampled,weight_sum,max_prob,min_prob,effective_questions,"
         "sampled_mass,mean_p_tilde_after,mean_p_emp_sampled\n";
  for (const auto& [step, rs] : by_step) {
    double z = 0.0, wmax = 0.0, wmin = std::numeric_limits<double>::infinity(), sq = 0.0, sampled_w = 0.0, pt = 0.0, pe = 0.0;
    long n_sampled = 0;
    for (const auto& r : rs) {
      z += r.weight;
      wmax = std::max(wmax, r.weight);
      wmin = std::min(wmin, r.weight);
      pt += r.p_tilde_after;
      if (r.sampled) {
        ++n_sampled;
        sampled_w += r.weight;
        pe += r.p_emp.value_or(0.0);
      }
    }
    for (const auto& r : rs) sq += (r.weight / z) * (r.weight / z);
    out += std::to_string(step) + "," + std::to_string(rs.size()) + "," + std::to_string(n_sampled) + "," +
           format_double(z) + "," + format_double(wmax / z) + "," + format_double(wmin / z) + "," +
           format_double(1.0 / sq) + "," + format_double(sampled_w / z) + "," +
           format_double(pt / static_cast<double>(rs.size())) + "," +
           format_double(n_sampled > 0 ? pe / static_cast<double>(n_sampled) : 0.0) + "\n";
  }
  write_text_file(m.out / "curriculum_summary.csv", out);
  log << "summarized " << by_step.size() << " steps\n";
  return kExitOk;
}

int cmd_compare(const ExperimentManifest& m, std::ostream& log) {
  const TrainConfig base = load_config(m);
  const GeneratedBank gb = load_bank(m);
  const auto [lo, hi] = m.seeds;
  if (hi < lo) throw std::invalid_argument("--seeds range is empty");
  prepare_out(m.out);

  struct Row { std::uint64_t seed; double pass1, passk, gap; };
  std::map<std::string, std::vector<Row>, std::less<>> rows;
  const auto order = methods_for(base);
  for (std::uint64_t seed = lo; seed <= hi; ++seed) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    for (const auto& [name, mcfg] : methods_for(cfg)) {
      const RunResult run = train(mcfg, gb.bank, gb.init);
      check_run(mcfg, run);
      const EvalReport r = evaluate(run.final_params, gb.bank, m.k, m.eval_temperature, seeded_rng(seed, "eval"));
      check_report(r);
      rows[std::string(name)].push_back({seed, r.mean_pass1, r.mean_passk, exploration_gap(r)});
    }
    log << "seed " << seed << " done\n";
  }

  std::string csv = "# " + provenance(base).dump() + "\n";
  csv += "method,seed,pass1,passk,exploration_gap\n";
  json medians = json::object();
  for (const auto& [name, _] : order) {
    const auto& rs = rows.at(std::string(name));
    std::vector<double> p1, pk, gap;
    for (const auto& r : rs) {
      csv += std::string(name) + "," + std::to_string(r.seed) + "," + format_double(r.pass1) + "," +
             format_double(r.passk) + "," + format_double(r.gap) + "\n";
      p1.push_back(r.pass1);
      pk.push_back(r.passk);
      gap.push_back(r.gap);
    }
    const double mp1 = median(p1), mpk = median(pk), mgap = median(gap);
    csv += std::string(name) + ",median," + format_double(mp1) + "," + format_double(mpk) + "," +
           format_double(mgap) + "\n";
    medians[std::string(name)] = {{"pass1", mp1}, {"passk", mpk}, {"exploration_gap", mgap}};
  }
  write_text_file(m.out / "compare.csv", csv);

  const auto& full = medians["full"];
  const auto& grpo = medians["grpo"];
  const double d1 = full["pass1"].get<double>() - grpo["pass1"].get<double>();
  const double dk = full["passk"].get<double>() - grpo["passk"].get<double>();
  const double dg = full["exploration_gap"].get<double>() - grpo["exploration_gap"].get<double>();
  json summary = provenance(base);
  summary["k"] = m.k;
  summary["seeds"] = {lo, hi};
  summary["medians"] = medians;
  summary["full_minus_grpo"] = {{"pass1", d1}, {"passk", dk}, {"exploration_gap", dg}};
  summary["expected_direction_holds"] = dg >= 0.0 && dk >= 0.0 && dk > d1;
  write_text_file(m.out / "compare_summary.json", dump_doc(summary));
  log << "full - grpo (medians): pass@1 " << d1 << "  pass@" << m.k << " " << dk << "  gap " << dg << "\n";
  return kExitOk;
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [c, n] : kCommandNames)
    if (n == name) return c;
  return std::nullopt;
}

std::string_view command_name(Command c) {
  for (const auto& [cmd, n] : kCommandNames)
    if (cmd == c) return n;
  return "?";
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  auto to_u64 = [&text](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("bad seed range '" + text + "'");
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const auto v = to_u64(text);
    return {v, v};
  }
  const auto lo = to_u64(text.substr(0, dots));
  const auto hi = to_u64(text.substr(dots + 2));
  if (hi < lo) throw std::invalid_argument("bad seed range '" + text + "'");
  return {lo, hi};
}

int run_command(const ExperimentManifest& manifest, std::ostream& log) {
  try {
    switch (manifest.command) {
      case Command::kGenBank: return cmd_gen_bank(manifest, log);
      case Command::kTrain: return cmd_train(manifest, log);
      case Command::kEval: return cmd_eval(manifest, log);
      case Command::kAblate: return cmd_ablate(manifest, log);
      case Command::kTraceCurriculum: return cmd_trace(manifest, log);
      case Command::kCompare: return cmd_compare(manifest, log);
    }
    return kExitUsage;
  } catch (const FileNotFound& e) {
    log << "error: " << e.what() << "\n";
    return kExitMissingFile;
  } catch (const OutputNotEmpty& e) {
    log << "error: " << e.what() << "\n";
    return kExitOutputNotEmpty;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::logic_error& e) {
    log << "invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace fgexpo
