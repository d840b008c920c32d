#include "lckd/trainer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "lckd/checkpoint.hpp"
#include "lckd/election.hpp"
#include "lckd/errors.hpp"
#include "lckd/rng.hpp"

namespace lckd {

namespace {

enum Stream : std::uint64_t { kInit = 1, kBatch = 2, kDrop = 3 };

}  // namespace

void TrainConfig::validate() const {
  require(iterations >= 1, "iterations must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr_init > 0, "lr_init must be positive");
  require(lr_min >= 0 && lr_min <= lr_init, "need 0 <= lr_min <= lr_init");
  require(momentum >= 0 && momentum < 1, "need 0 <= momentum < 1");
  require(election_interval >= 1, "election_interval must be >= 1");
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  require(validation_fraction > 0 && validation_fraction < 1, "validation_fraction must be in (0, 1)");
  require(base_channels >= 1 && depth >= 1, "base_channels and depth must be >= 1");
  loss.validate();
}

double lr_at(std::int64_t iteration, const TrainConfig& c) {
  require(iteration >= 0 && iteration <= c.iterations, "lr_at: iteration outside [0, iterations]");
  const double phase = static_cast<double>(iteration) / static_cast<double>(c.iterations);
  return c.lr_min + 0.5 * (c.lr_init - c.lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

template <class T>
void nesterov_lookahead(std::span<const T> theta, std::span<const T> velocity, double lr, double momentum,
                        std::span<T> out) {
  const T step = static_cast<T>(lr * momentum);
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] - step * velocity[i];
}

template <class T>
void nesterov_update(std::span<T> theta, std::span<T> velocity, std::span<const T> grad, double lr,
                     double momentum) {
  const T mu = static_cast<T>(momentum), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity[i] = mu * velocity[i] + grad[i];
    theta[i] -= eta * velocity[i];
  }
}

template void nesterov_lookahead(std::span<const float>, std::span<const float>, double, double, std::span<float>);
template void nesterov_lookahead(std::span<const double>, std::span<const double>, double, double, std::span<double>);
template void nesterov_update(std::span<float>, std::span<float>, std::span<const float>, double, double);
template void nesterov_update(std::span<double>, std::span<double>, std::span<const double>, double, double);

Trainer::Trainer(TrainConfig config, ModelConfig model, std::vector<Sample> train,
                 std::vector<Sample> validation)
    : config_(std::move(config)),
      arch_([&] {
        model.base_channels = config_.base_channels;
        model.depth = config_.depth;
        model.seed = derive_seed(config_.seed, kInit);
        return model;
      }()),
      train_(std::move(train)),
      validation_(std::move(validation)) {
  config_.validate();
  require(!train_.empty(), "training split is empty");
  require(!validation_.empty(), "validation split is empty");
  for (const auto* set : {&train_, &validation_})
    for (const auto& s : *set) {
      require(static_cast<int>(s.modalities.size()) == arch_.config().n_modalities &&
                  static_cast<int>(s.masks.size()) == arch_.config().n_tasks,
              "case " + s.case_id + " does not match the model's modality/task counts");
      arch_.config().check_extent(s.modalities.front().extent);
    }
  state_.params = arch_.init_params<float>();
  state_.velocity = arch_.zeros<float>();
  state_.batch_rng.seed(derive_seed(config_.seed, kBatch));
  state_.drop_rng.seed(derive_seed(config_.seed, kDrop));
}

ElectionRecord Trainer::elect_now() {
  ElectionRecord rec = run_election(arch_, state_.params, validation_, config_.teacher_mode, state_.iteration);
  state_.teachers = rec.chosen;
  state_.has_teachers = true;
  return rec;
}

LossRecord Trainer::step_on(std::span<const Sample* const> batch, std::span<const AvailabilityMask> masks) {
  require(state_.has_teachers, "train_step needs an elected teacher set");
  require(!batch.empty() && batch.size() == masks.size(), "one availability mask per batch sample");
  const double lr = lr_at(state_.iteration, config_);
  const double mu = config_.momentum;

  ModelParams<float> lookahead = arch_.zeros<float>();
  for (std::size_t t = 0; t < lookahead.tensors.size(); ++t)
    nesterov_lookahead<float>(state_.params.tensors[t], state_.velocity.tensors[t], lr, mu, lookahead.tensors[t]);

  ModelParams<float> grads = arch_.zeros<float>();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const LossConfig& lc = config_.loss;
  double task = 0, ckd = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Sample& s = *batch[b];
    const auto pass = forward_train<float>(arch_, lookahead, s.modalities, masks[b]);
    Tensor<float> g_logits;
    task += inv_b * task_loss_from_logits(pass.logits, s.target(), lc, &g_logits, inv_b);
    std::vector<std::optional<Tensor<float>>> g_ckd;
    const bool want_ckd_grad = lc.alpha > 0;
    ckd += inv_b * ckd_loss(pass.features, state_.teachers, masks[b], lc, want_ckd_grad ? &g_ckd : nullptr,
                            lc.alpha * inv_b);
    backward_train<float>(arch_, lookahead, pass, g_logits, g_ckd, grads);
  }

  LossRecord rec;
  rec.iteration = state_.iteration;
  rec.task = task;
  rec.ckd = ckd;
  rec.total = total_loss(task, ckd, lc.alpha);
  rec.lr = lr;
  rec.n_missing = masks.front().missing_count();
  rec.mask = masks.front().bits();
  rec.teachers = state_.teachers.unique;

  if (!grads.all_finite())
    throw NumericalError("non-finite gradient at iteration " + std::to_string(state_.iteration));
  for (std::size_t t = 0; t < grads.tensors.size(); ++t)
    nesterov_update<float>(state_.params.tensors[t], state_.velocity.tensors[t], grads.tensors[t], lr, mu);
  if (!state_.params.all_finite())
    throw NumericalError("non-finite parameter after iteration " + std::to_string(state_.iteration));
  ++state_.iteration;
  return rec;
}

LossRecord Trainer::step(const std::function<void(const ElectionRecord&)>& on_election) {
  if (election_due(state_.iteration, config_.election_interval)) {
    const auto rec = elect_now();
    if (on_election) on_election(rec);
  }
  const int n_train = static_cast<int>(train_.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Sample*> batch;
  for (int b = 0; b < config_.batch_size; ++b) {
    // Without replacement while the split allows it.
    const int lo = b % n_train;
    if (lo == 0 && b > 0) std::iota(order.begin(), order.end(), 0);
    std::uniform_int_distribution<int> pick(lo, n_train - 1);
    std::swap(order[lo], order[pick(state_.batch_rng)]);
    batch.push_back(&train_[order[lo]]);
  }
  std::vector<AvailabilityMask> masks;
  const int n = arch_.config().n_modalities;
  masks.push_back(sample_mask(n, state_.drop_rng));
  for (int b = 1; b < config_.batch_size; ++b)
    masks.push_back(config_.per_sample_masks ? sample_mask(n, state_.drop_rng) : masks.front());
  return step_on(batch, masks);
}

void Trainer::run(const std::function<void(const LossRecord&)>& on_loss,
                  const std::function<void(const ElectionRecord&)>& on_election,
                  const std::function<void(std::int64_t)>& on_checkpoint) {
  while (state_.iteration < config_.iterations) {
    const LossRecord rec = step(on_election);
    if (on_loss) on_loss(rec);
    if (on_checkpoint && config_.checkpoint_interval > 0 && state_.iteration % config_.checkpoint_interval == 0 &&
        state_.iteration < config_.iterations)
      on_checkpoint(state_.iteration);
  }
  if (config_.elect_at_end) {
    const auto rec = elect_now();
    if (on_election) on_election(rec);
  }
}

std::string losses_csv_header() { return "iteration,task_loss,ckd_loss,total_loss,n_missing,teachers,mask,lr"; }

std::string to_csv_row(const LossRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.iteration << ',' << r.task << ',' << r.ckd << ',' << r.total << ',' << r.n_missing << ',';
  for (std::size_t i = 0; i < r.teachers.size(); ++i) os << (i ? ";" : "") << r.teachers[i] + 1;
  os << ',' << r.mask << ',' << r.lr;
  return os.str();
}

RunSummary run_training(const TrainConfig& config, const Manifest& manifest, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const Split parts = split(manifest, config.validation_fraction, config.seed);
  ModelConfig model;
  model.spatial_dims = manifest.dims;
  model.n_modalities = manifest.n_modalities;
  model.n_tasks = manifest.n_tasks;
  Trainer trainer(config, model, load_cases(manifest, parts.train), load_cases(manifest, parts.validation));

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create run directory " + out_dir.string() + ": " + ec.message());
  {
    std::ofstream os(out_dir / "config.snapshot");
    if (!os) throw DataError("cannot write config snapshot");
    os << to_ini(config);
  }
  std::ofstream losses(out_dir / "losses.csv");
  if (!losses) throw DataError("cannot write losses.csv");
  losses << losses_csv_header() << '\n';
  const auto log_path = out_dir / "elections.log";
  std::ofstream(log_path, std::ios::trunc).close();

  RunSummary summary;
  summary.dir = out_dir;
  auto meta_at = [&](std::int64_t iteration) {
    CheckpointMeta meta;
    meta.model = trainer.arch().config();
    meta.iteration = iteration;
    meta.split_seed = config.seed;
    meta.validation_fraction = config.validation_fraction;
    return meta;
  };
  trainer.run([&](const LossRecord& r) { losses << to_csv_row(r) << '\n'; },
              [&](const ElectionRecord& e) {
                append_election(log_path, e);
                summary.elections.push_back(e);
              },
              [&](std::int64_t it) {
                save_checkpoint(out_dir / ("ckpt_" + std::to_string(it) + ".bin"), trainer.arch(),
                                trainer.state().params, meta_at(it));
              });
  losses.flush();
  const auto final_it = trainer.state().iteration;
  save_checkpoint(out_dir / ("ckpt_" + std::to_string(final_it) + ".bin"), trainer.arch(), trainer.state().params,
                  meta_at(final_it));
  save_checkpoint(out_dir / "ckpt_final.bin", trainer.arch(), trainer.state().params, meta_at(final_it));
  summary.iterations = final_it;
  summary.final_teachers = trainer.state().teachers;
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

std::string to_ini(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[train]\n"
     << "iterations = " << c.iterations << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "lr_init = " << c.lr_init << '\n'
     << "lr_min = " << c.lr_min << '\n'
     << "momentum = " << c.momentum << '\n'
     << "election_interval = " << c.election_interval << '\n'
     << "elect_at_end = " << b(c.elect_at_end) << '\n'
     << "teacher_mode = " << to_string(c.teacher_mode) << '\n'
     << "seed = " << c.seed << '\n'
     << "checkpoint_interval = " << c.checkpoint_interval << '\n'
     << "per_sample_masks = " << b(c.per_sample_masks) << '\n'
     << "validation_fraction = " << c.validation_fraction << "\n\n"
     << "[loss]\n"
     << "alpha = " << c.loss.alpha << '\n'
     << "p_norm = " << c.loss.p_norm << '\n'
     << "squared_l2 = " << b(c.loss.squared_l2) << '\n'
     << "reduction = " << to_string(c.loss.reduction) << '\n'
     << "detach_teacher = " << b(c.loss.detach_teacher) << '\n'
     << "task_ce_weight = " << c.loss.task_ce_weight << '\n'
     << "task_dice_weight = " << c.loss.task_dice_weight << '\n'
     << "dice_smooth = " << c.loss.dice_smooth << "\n\n"
     << "[model]\n"
     << "base_channels = " << c.base_channels << '\n'
     << "depth = " << c.depth << '\n';
  return os.str();
}

namespace {

namespace pt = boost::property_tree;

template <class V>
V get(const pt::ptree& node, const std::string& key) {
  try {
    return node.get_value<V>();
  } catch (const pt::ptree_error&) {
    throw UsageError("config key '" + key + "' has an invalid value '" + node.data() + "'");
  }
}

bool get_bool(const pt::ptree& node, const std::string& key) {
  const std::string v = node.data();
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + key + "' expects true/false, got '" + v + "'");
}

TrainConfig apply_tree(const pt::ptree& tree, TrainConfig c) {
  for (const auto& [section, body] : tree) {
    for (const auto& [key, node] : body) {
      const std::string k = section + "." + key;
      if (k == "train.iterations") c.iterations = get<std::int64_t>(node, k);
      else if (k == "train.batch_size") c.batch_size = get<int>(node, k);
      else if (k == "train.lr_init") c.lr_init = get<double>(node, k);
      else if (k == "train.lr_min") c.lr_min = get<double>(node, k);
      else if (k == "train.momentum") c.momentum = get<double>(node, k);
      else if (k == "train.election_interval") c.election_interval = get<std::int64_t>(node, k);
      else if (k == "train.elect_at_end") c.elect_at_end = get_bool(node, k);
      else if (k == "train.teacher_mode") c.teacher_mode = parse_teacher_mode(node.data());
      else if (k == "train.seed") c.seed = get<std::uint64_t>(node, k);
      else if (k == "train.checkpoint_interval") c.checkpoint_interval = get<std::int64_t>(node, k);
      else if (k == "train.per_sample_masks") c.per_sample_masks = get_bool(node, k);
      else if (k == "train.validation_fraction") c.validation_fraction = get<double>(node, k);
      else if (k == "loss.alpha") c.loss.alpha = get<double>(node, k);
      else if (k == "loss.p_norm") c.loss.p_norm = get<int>(node, k);
      else if (k == "loss.squared_l2") c.loss.squared_l2 = get_bool(node, k);
      else if (k == "loss.reduction") c.loss.reduction = parse_ckd_reduction(node.data());
      else if (k == "loss.detach_teacher") c.loss.detach_teacher = get_bool(node, k);
      else if (k == "loss.task_ce_weight") c.loss.task_ce_weight = get<double>(node, k);
      else if (k == "loss.task_dice_weight") c.loss.task_dice_weight = get<double>(node, k);
      else if (k == "loss.dice_smooth") c.loss.dice_smooth = get<double>(node, k);
      else if (k == "model.base_channels") c.base_channels = get<int>(node, k);
      else if (k == "model.depth") c.depth = get<int>(node, k);
      else throw UsageError("unknown config key '" + k + "'");
    }
  }
  return c;
}

}  // namespace

TrainConfig apply_ini_text(const std::string& text, TrainConfig base) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  return apply_tree(tree, std::move(base));
}

TrainConfig apply_ini(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return apply_ini_text(ss.str(), std::move(base));
}

}  // namespace lckd
