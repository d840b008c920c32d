#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "lckd/checkpoint.hpp"
#include "lckd/dataset.hpp"
#include "lckd/election.hpp"
#include "lckd/errors.hpp"
#include "lckd/evaluator.hpp"
#include "lckd/kernels.hpp"
#include "lckd/trainer.hpp"
#include "svg.hpp"

namespace lckd::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Refuses a non-empty output directory unless forced, in which case it is cleared.
void claim_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw UsageError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void claim_file(const fs::path& file, bool force) {
  if (fs::exists(file) && !force) throw UsageError(file.string() + " exists (use --force to overwrite)");
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
    if (!os) throw DataError("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

struct RunManifest {
  std::string command;
  json config;
  std::string dataset_fingerprint;
  std::map<std::string, std::string> artifacts;
  std::string started;
  Clock::time_point t0 = Clock::now();

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["dataset_fingerprint"] = dataset_fingerprint;
    j["artifacts"] = artifacts;
    j["timings"] = {{"started_utc", started},
                    {"wall_seconds", std::chrono::duration<double>(Clock::now() - t0).count()}};
    write_text(dir / "run_manifest.json", j.dump(2) + "\n");
  }
};

std::pair<int, int> parse_teacher_flag(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError("--teacher expects k=i, got '" + text + "'");
  try {
    std::size_t used = 0;
    const int k = std::stoi(text.substr(0, eq), &used);
    if (used != eq) throw std::invalid_argument(text);
    const int i = std::stoi(text.substr(eq + 1), &used);
    if (used != text.size() - eq - 1) throw std::invalid_argument(text);
    return {k, i};
  } catch (const std::logic_error&) {
    throw UsageError("--teacher expects k=i with integers, got '" + text + "'");
  }
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string out;
  DatasetSpec spec;
  std::vector<std::string> teachers;
  double signal = 1.0, distractor = 0.2, noise = 0.1;
  bool force = false;
};

int gen_data(const GenArgs& a, std::ostream& out) {
  RunManifest rm{"gen-data", {}, {}, {}, utc_now()};
  a.spec.validate();
  InformativenessPlan plan;
  plan.signal_contrast = a.signal;
  plan.distractor_contrast = a.distractor;
  plan.noise_sigma = a.noise;
  plan.teacher_of_task.assign(a.spec.n_tasks, -1);
  for (const auto& t : a.teachers) {
    const auto [k, i] = parse_teacher_flag(t);
    require(k >= 1 && k <= a.spec.n_tasks, "--teacher task index out of range: " + t);
    require(i >= 1 && i <= a.spec.n_modalities, "--teacher modality index out of range: " + t);
    plan.teacher_of_task[k - 1] = i - 1;
  }
  for (int k = 0; k < a.spec.n_tasks; ++k)
    if (plan.teacher_of_task[k] < 0) plan.teacher_of_task[k] = k % a.spec.n_modalities;
  plan.validate(a.spec.n_modalities, a.spec.n_tasks);

  claim_dir(a.out, a.force);
  const fs::path manifest_path = generate(a.spec, plan, a.out);
  const Manifest m = Manifest::load(manifest_path);
  rm.dataset_fingerprint = fingerprint(m);
  json teachers = json::object();
  for (int k = 0; k < a.spec.n_tasks; ++k) teachers[std::to_string(k + 1)] = plan.teacher_of_task[k] + 1;
  rm.config = {{"n_modalities", a.spec.n_modalities}, {"n_tasks", a.spec.n_tasks},
               {"dims", a.spec.spatial_dims},         {"side", a.spec.side},
               {"cases", a.spec.n_cases},             {"seed", a.spec.seed},
               {"teacher_of_task", teachers},         {"signal_contrast", plan.signal_contrast},
               {"distractor_contrast", plan.distractor_contrast}, {"noise_sigma", plan.noise_sigma}};
  rm.artifacts = {{"manifest", "manifest.json"}, {"cases", "cases/"}};
  rm.write(a.out);
  out << "wrote " << a.spec.n_cases << " cases to " << a.out << "\nfingerprint " << rm.dataset_fingerprint << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, config;
  std::optional<double> alpha;
  std::optional<int> p_norm;
  std::optional<std::string> teacher_mode;
  std::optional<std::int64_t> iterations, election_interval;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

int train(const TrainArgs& a, std::ostream& out) {
  RunManifest rm{"train", {}, {}, {}, utc_now()};
  TrainConfig c = a.config.empty() ? TrainConfig{} : apply_ini(a.config);
  if (a.alpha) c.loss.alpha = *a.alpha;
  if (a.p_norm) c.loss.p_norm = *a.p_norm;
  if (a.teacher_mode) c.teacher_mode = parse_teacher_mode(*a.teacher_mode);
  if (a.iterations) c.iterations = *a.iterations;
  if (a.election_interval) c.election_interval = *a.election_interval;
  if (a.seed) c.seed = *a.seed;
  c.validate();

  const Manifest m = Manifest::load(a.data);
  rm.dataset_fingerprint = fingerprint(m);
  claim_dir(a.out, a.force);
  const RunSummary s = run_training(c, m, a.out);

  rm.config = {{"ini", to_ini(c)}, {"data", fs::absolute(a.data).string()}};
  rm.artifacts = {{"config", "config.snapshot"},
                  {"losses", "losses.csv"},
                  {"elections", "elections.log"},
                  {"final_checkpoint", "ckpt_final.bin"},
                  {"last_checkpoint", "ckpt_" + std::to_string(s.iterations) + ".bin"}};
  rm.write(a.out);
  if (!a.quiet) {
    out << "trained " << s.iterations << " iterations in " << std::fixed << std::setprecision(1) << s.seconds
        << " s\nfinal teachers:";
    for (int t : s.final_teachers.unique) out << ' ' << t + 1;
    out << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- evaluate / elect

std::vector<std::string> ids_for(const Manifest& m, const CheckpointMeta& meta, const std::string& which) {
  if (which == "all") return m.cases;
  const Split s = split(m, meta.validation_fraction, meta.split_seed);
  if (which == "train") return s.train;
  if (which == "val") return s.validation;
  throw UsageError("--split must be train, val or all");
}

void check_compatible(const Manifest& m, const ModelConfig& model) {
  if (m.n_modalities != model.n_modalities || m.n_tasks != model.n_tasks || m.dims != model.spatial_dims)
    throw DataError("checkpoint was trained for N=" + std::to_string(model.n_modalities) + ", K=" +
                    std::to_string(model.n_tasks) + ", dims=" + std::to_string(model.spatial_dims) +
                    " but the dataset has N=" + std::to_string(m.n_modalities) + ", K=" +
                    std::to_string(m.n_tasks) + ", dims=" + std::to_string(m.dims));
  try {
    model.check_extent(m.extent());
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint and dataset disagree: ") + e.what());
  }
}

struct EvalArgs {
  std::string ckpt, data, split = "val", out;
  double threshold = 0.5;
  bool force = false;
};

int evaluate_cmd(const EvalArgs& a, std::ostream& out) {
  RunManifest rm{"evaluate", {}, {}, {}, utc_now()};
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Manifest m = Manifest::load(a.data);
  check_compatible(m, ck.meta.model);
  const auto ids = ids_for(m, ck.meta, a.split);
  rm.dataset_fingerprint = fingerprint(m);
  claim_dir(a.out, a.force);

  const Architecture arch(ck.meta.model);
  const EvalReport rep = evaluate(arch, ck.params, load_cases(m, ids), a.threshold);
  rep.write_rows_csv(fs::path(a.out) / "rows.csv");
  rep.write_aggregate_csv(fs::path(a.out) / "aggregate.csv");
  rm.config = {{"ckpt", fs::absolute(a.ckpt).string()},
               {"data", fs::absolute(a.data).string()},
               {"split", a.split},
               {"threshold", a.threshold},
               {"cases", ids.size()}};
  rm.artifacts = {{"rows", "rows.csv"}, {"aggregate", "aggregate.csv"}};
  rm.write(a.out);

  out << "evaluated " << ids.size() << " cases over " << rep.combinations.size() << " combinations\n";
  out << "average";
  for (int k = 0; k < rep.n_tasks; ++k) out << " task" << k + 1 << '=' << std::setprecision(4) << rep.average[k];
  out << '\n';
  return kOk;
}

struct ElectArgs {
  std::string ckpt, data, split = "val", mode = "multi", out;
  bool force = false;
};

int elect_cmd(const ElectArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Manifest m = Manifest::load(a.data);
  check_compatible(m, ck.meta.model);
  const TeacherMode mode = parse_teacher_mode(a.mode);
  const auto ids = ids_for(m, ck.meta, a.split);
  const Architecture arch(ck.meta.model);
  const ElectionRecord rec = run_election(arch, ck.params, load_cases(m, ids), mode, ck.meta.iteration);
  const std::string line = to_json_line(rec);
  if (!a.out.empty()) {
    claim_file(a.out, a.force);
    write_text(a.out, line + "\n");
  }
  out << line << '\n';
  return kOk;
}

// ---------------------------------------------------------------- compare

fs::path rows_path(const std::string& p) {
  const fs::path path(p);
  return fs::is_directory(path) ? path / "rows.csv" : path;
}

struct CompareArgs {
  std::string a, b, combination;
  int task = 0;  // 1-based; 0 = every task
};

int compare_cmd(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  const EvalReport ra = EvalReport::read_rows_csv(rows_path(args.a));
  const EvalReport rb = EvalReport::read_rows_csv(rows_path(args.b));
  using Key = std::tuple<std::string, int, std::string>;  // combination, task, case
  std::map<Key, double> lookup;
  for (const auto& r : rb.rows) lookup[{r.combination, r.task, r.case_id}] = r.dice;
  if (ra.rows.size() != rb.rows.size()) throw DataError("reports are misaligned: different row counts");

  // Groups keep report order.
  std::vector<std::pair<std::string, int>> groups;
  std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> paired;
  for (const auto& r : ra.rows) {
    const auto it = lookup.find({r.combination, r.task, r.case_id});
    if (it == lookup.end())
      throw DataError("reports are misaligned: no match for combination " + r.combination + ", case " + r.case_id +
                      ", task " + std::to_string(r.task + 1));
    if (!args.combination.empty() && r.combination != args.combination) continue;
    if (args.task != 0 && r.task != args.task - 1) continue;
    const std::pair<std::string, int> g{r.combination, r.task};
    if (!paired.contains(g)) groups.push_back(g);
    paired[g].first.push_back(r.dice);
    paired[g].second.push_back(it->second);
  }
  if (groups.empty()) throw UsageError("no rows match the requested combination/task");

  int degenerate = 0;
  for (const auto& g : groups) {
    const auto& [xa, xb] = paired[g];
    out << "combination=" << g.first << " task=" << g.second + 1 << ' ';
    try {
      const TTestResult r = paired_ttest_one_tailed(xa, xb);
      out << std::setprecision(6) << "t=" << r.t << " p=" << r.p << " n=" << r.n << '\n';
    } catch (const NumericalError& e) {
      ++degenerate;
      out << "degenerate n=" << xa.size() << '\n';
    }
  }
  if (degenerate == static_cast<int>(groups.size())) {
    err << "error: every comparison is degenerate (zero variance of differences)\n";
    return kNumerical;
  }
  return kOk;
}

// ---------------------------------------------------------------- plot

std::pair<double, std::string> parse_labelled(const std::string& text, const std::string& flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError(flag + " expects alpha=path, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, eq)), text.substr(eq + 1)};
  } catch (const std::logic_error&) {
    throw UsageError(flag + " expects a numeric alpha, got '" + text + "'");
  }
}

std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct PlotArgs {
  std::string kind, out, log, combination = "average";
  std::vector<std::string> reports, l2, losses;
  int modalities = 0;
  bool force = false;
};

double report_value(const EvalReport& r, const std::string& combination, int task) {
  if (combination == "average") return r.average.at(task);
  if (std::find(r.combinations.begin(), r.combinations.end(), combination) == r.combinations.end())
    throw DataError("report has no combination " + combination);
  return r.mean_for(combination, task);
}

std::string plot_alpha(const PlotArgs& a) {
  if (a.reports.empty()) throw UsageError("plot alpha needs at least one --report alpha=path");
  std::map<double, EvalReport> main;
  for (const auto& r : a.reports) {
    auto [alpha, path] = parse_labelled(r, "--report");
    main.emplace(alpha, EvalReport::read_rows_csv(rows_path(path)));
  }
  std::vector<std::string> ticks;
  std::map<double, double> position;
  for (const auto& [alpha, rep] : main) {
    position[alpha] = static_cast<double>(ticks.size());
    ticks.push_back(short_number(alpha));
  }
  const int k_tasks = main.begin()->second.n_tasks;
  std::vector<svg::Series> series;
  for (int k = 0; k < k_tasks; ++k) {
    svg::Series s{"task " + std::to_string(k + 1), {}, false};
    for (const auto& [alpha, rep] : main) s.points.emplace_back(position[alpha], report_value(rep, a.combination, k));
    series.push_back(std::move(s));
  }
  for (int k = 0; k < k_tasks && !a.l2.empty(); ++k) {
    svg::Series s{"task " + std::to_string(k + 1) + " (L2)", {}, true};
    for (const auto& r : a.l2) {
      auto [alpha, path] = parse_labelled(r, "--l2");
      if (!position.contains(alpha)) throw UsageError("--l2 alpha " + short_number(alpha) + " has no --report twin");
      s.points.emplace_back(position[alpha], report_value(EvalReport::read_rows_csv(rows_path(path)), a.combination, k));
    }
    series.push_back(std::move(s));
  }
  return svg::line_chart({"Dice vs alpha (" + a.combination + ")", "alpha", "Dice", ticks, false}, series);
}

std::string plot_teachers(const PlotArgs& a) {
  if (a.log.empty()) throw UsageError("plot teachers needs --log");
  const auto records = read_election_log(a.log);
  if (records.empty()) throw DataError("election log is empty: " + a.log);
  int n = a.modalities;
  if (n == 0) n = static_cast<int>(records.front().dice.size());
  const auto pct = teacher_percentages(records, n);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back("modality " + std::to_string(i + 1));
  return svg::bar_chart({"Modalities selected as teachers", "", "share of elections", {}, false}, labels, pct);
}

std::string plot_losses(const PlotArgs& a) {
  if (a.losses.empty()) throw UsageError("plot losses needs --losses path");
  std::vector<svg::Series> series;
  for (const auto& path : a.losses) {
    std::ifstream is(path);
    if (!is) throw DataError("missing loss log: " + path);
    std::string header, line;
    if (!std::getline(is, header)) throw DataError("empty loss log: " + path);
    std::vector<std::string> cols;
    {
      std::stringstream ss(header);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    }
    const auto col = [&](const std::string& name) {
      const auto it = std::find(cols.begin(), cols.end(), name);
      if (it == cols.end()) throw DataError(path + " lacks column " + name);
      return static_cast<std::size_t>(it - cols.begin());
    };
    const std::size_t ci = col("iteration"), ct = col("task_loss"), cc = col("ckd_loss"), cz = col("total_loss");
    const std::string prefix = a.losses.size() > 1 ? fs::path(path).parent_path().filename().string() + " " : "";
    svg::Series task{prefix + "task", {}, false}, ckd{prefix + "ckd", {}, false}, total{prefix + "total", {}, false};
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
      if (f.size() < cols.size()) throw DataError("short row in " + path + ": " + line);
      const double it = std::stod(f[ci]);
      task.points.emplace_back(it, std::stod(f[ct]));
      ckd.points.emplace_back(it, std::stod(f[cc]));
      total.points.emplace_back(it, std::stod(f[cz]));
    }
    if (task.points.empty()) throw DataError("loss log has no rows: " + path);
    series.push_back(std::move(task));
    series.push_back(std::move(ckd));
    series.push_back(std::move(total));
  }
  return svg::line_chart({"Training losses", "iteration", "loss", {}, false}, series);
}

int plot_cmd(const PlotArgs& a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("plot needs --out");
  claim_file(a.out, a.force);
  std::string doc;
  if (a.kind == "alpha") doc = plot_alpha(a);
  else if (a.kind == "teachers") doc = plot_teachers(a);
  else if (a.kind == "losses") doc = plot_losses(a);
  else throw UsageError("--kind must be alpha, teachers or losses");
  write_text(a.out, doc);
  out << "wrote " << a.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learnable cross-modal knowledge distillation lab", "lckd"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic planted-teacher dataset");
  g->add_option("--out", gen.out, "Dataset directory")->required();
  g->add_option("--modalities", gen.spec.n_modalities, "Modalities N")->capture_default_str();
  g->add_option("--tasks", gen.spec.n_tasks, "Tasks K")->capture_default_str();
  g->add_option("--dims", gen.spec.spatial_dims, "Spatial dimensions (2 or 3)")->capture_default_str();
  g->add_option("--side", gen.spec.side, "Voxels per axis")->capture_default_str();
  g->add_option("--cases", gen.spec.n_cases, "Number of cases")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
  g->add_option("--teacher", gen.teachers, "Planted teacher k=i (1-based, repeatable)");
  g->add_option("--signal", gen.signal, "Contrast in the planted modality")->capture_default_str();
  g->add_option("--distractor", gen.distractor, "Contrast in other modalities")->capture_default_str();
  g->add_option("--noise", gen.noise, "Gaussian noise sigma")->capture_default_str();
  g->add_flag("--force", gen.force, "Overwrite an existing output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train an LCKD model");
  t->add_option("--data", tr.data, "Dataset directory or manifest")->required();
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--config", tr.config, "INI config file");
  t->add_option("--alpha", tr.alpha, "Distillation weight");
  t->add_option("--p-norm", tr.p_norm, "Distillation norm (1 or 2)");
  t->add_option("--teacher-mode", tr.teacher_mode, "multi or single");
  t->add_option("--iterations", tr.iterations, "Training iterations");
  t->add_option("--election-interval", tr.election_interval, "Iterations between elections");
  t->add_option("--seed", tr.seed, "Training seed");
  t->add_flag("--force", tr.force, "Overwrite an existing run directory");
  t->add_flag("--quiet", tr.quiet, "No summary output");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint over every availability combination");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory or manifest")->required();
  e->add_option("--split", ev.split, "train, val or all")->capture_default_str();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--threshold", ev.threshold, "Binarization threshold")->capture_default_str();
  e->add_flag("--force", ev.force, "Overwrite an existing report directory");

  ElectArgs el;
  auto* l = app.add_subcommand("elect", "Run one teacher election on a checkpoint");
  l->add_option("--ckpt", el.ckpt, "Checkpoint file")->required();
  l->add_option("--data", el.data, "Dataset directory or manifest")->required();
  l->add_option("--split", el.split, "train, val or all")->capture_default_str();
  l->add_option("--mode", el.mode, "multi or single")->capture_default_str();
  l->add_option("--out", el.out, "Also write the record to this file");
  l->add_flag("--force", el.force, "Overwrite --out");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "One-tailed paired t-test between two reports (a > b)");
  c->add_option("a", cmp.a, "Report directory or rows.csv")->required();
  c->add_option("b", cmp.b, "Report directory or rows.csv")->required();
  c->add_option("--combination", cmp.combination, "Only this availability bit-string");
  c->add_option("--task", cmp.task, "Only this task (1-based)");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Write a static SVG chart");
  p->add_option("--kind", pl.kind, "alpha, teachers or losses")->required();
  p->add_option("--out", pl.out, "SVG file")->required();
  p->add_option("--report", pl.reports, "alpha=report (repeatable)");
  p->add_option("--l2", pl.l2, "alpha=report for L2 runs, drawn as stars (repeatable)");
  p->add_option("--combination", pl.combination, "Bit-string or 'average'")->capture_default_str();
  p->add_option("--log", pl.log, "Election log");
  p->add_option("--modalities", pl.modalities, "Modality count for the teacher chart");
  p->add_option("--losses", pl.losses, "losses.csv (repeatable)");
  p->add_flag("--force", pl.force, "Overwrite --out");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& h) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& h) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << '\n';
    return kUsage;
  }

  try {
    configure_threads(0, true);
    if (*g) return gen_data(gen, out);
    if (*t) return train(tr, out);
    if (*e) return evaluate_cmd(ev, out);
    if (*l) return elect_cmd(el, out);
    if (*c) return compare_cmd(cmp, out, err);
    if (*p) return plot_cmd(pl, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << '\n';
    return kData;
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "data error: " << ex.what() << '\n';
    return kData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace lckd::cli
