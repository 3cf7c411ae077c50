#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qunet/checkpoint.hpp"
#include "qunet/data.hpp"
#include "qunet/models.hpp"
#include "qunet/nn.hpp"
#include "qunet/rng.hpp"
#include "qunet/tensor.hpp"

namespace qunet::harness {

// Shortest round-trip decimal form via to_chars: locale-free and
// deterministic, so result files are byte-identical across runs.
inline std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

// Binarizes pred at `threshold` and returns |P n T| / |P u T|; an empty
// union counts as perfect agreement (IoU 1).
inline double iou(const Tensor& pred, const Tensor& target, double threshold = 0.5) {
  require_shape(pred.same_shape(target), "iou: shape mismatch");
  long long inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] >= threshold;
    const bool t = target.data[i] >= 0.5;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Summary statistics (boxplot quantities)
// ---------------------------------------------------------------------------

struct SummaryStats {
  double mean = 0.0;
  double median = 0.0;          // Q2
  double upper_quartile = 0.0;
  double lower_quartile = 0.0;
  double iqr = 0.0;
  double whisker_high = 0.0;
  double whisker_low = 0.0;
  std::vector<double> outliers;
};

namespace detail {

// Linear interpolation between order statistics: position (n-1)*p.
inline double quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Whiskers extend to the most extreme data elements still within 1.5 IQR of
// the box edges; everything beyond is listed as an outlier.
inline SummaryStats aggregate_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("aggregate_stats: empty list");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  SummaryStats s;
  for (double v : sorted) s.mean += v;
  s.mean /= static_cast<double>(sorted.size());
  s.median = detail::quantile(sorted, 0.5);
  s.lower_quartile = detail::quantile(sorted, 0.25);
  s.upper_quartile = detail::quantile(sorted, 0.75);
  s.iqr = s.upper_quartile - s.lower_quartile;

  const double hi_fence = s.upper_quartile + 1.5 * s.iqr;
  const double lo_fence = s.lower_quartile - 1.5 * s.iqr;
  s.whisker_high = s.upper_quartile;
  s.whisker_low = s.lower_quartile;
  for (double v : sorted) {
    if (v <= hi_fence) s.whisker_high = std::max(s.whisker_high, v);
    if (v >= lo_fence) s.whisker_low = std::min(s.whisker_low, v);
    if (v > hi_fence || v < lo_fence) s.outliers.push_back(v);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct RunResult {
  std::string model_tag;
  std::string scale;
  int partition_seed = 0;
  double test_iou = 0.0;
  std::vector<double> epoch_losses;
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 64;
  double lr = 1e-3;
};

namespace detail {

inline void fill_batch(const std::vector<const data::Sample*>& samples,
                       const std::vector<int>& order, int from, int to, Tensor& x,
                       Tensor& t) {
  const int b = to - from;
  const data::Sample& first = *samples[static_cast<std::size_t>(order[static_cast<std::size_t>(from)])];
  const int H = first.image.dim(1), W = first.image.dim(2);
  x = Tensor({b, 3, H, W});
  t = Tensor({b, 1, H, W});
  for (int i = 0; i < b; ++i) {
    const data::Sample& s = *samples[static_cast<std::size_t>(order[static_cast<std::size_t>(from + i)])];
    require_shape(s.image.shape == first.image.shape && s.mask.shape == first.mask.shape,
                  "batch assembly: sample '" + s.id + "' differs in size");
    std::copy(s.image.data.begin(), s.image.data.end(),
              x.data.begin() + static_cast<std::size_t>(i) * s.image.data.size());
    std::copy(s.mask.data.begin(), s.mask.data.end(),
              t.data.begin() + static_cast<std::size_t>(i) * s.mask.data.size());
  }
}

}  // namespace detail

// Mean per-image IoU over a list of samples, evaluated in chunks.
inline double evaluate_iou(models::Model& model, const std::vector<const data::Sample*>& samples,
                           int batch_size) {
  double acc = 0.0;
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (int from = 0; from < static_cast<int>(samples.size()); from += batch_size) {
    const int to = std::min<int>(from + batch_size, static_cast<int>(samples.size()));
    Tensor x, t;
    detail::fill_batch(samples, order, from, to, x, t);
    const Tensor pred = model.forward(x);
    const std::size_t plane = t.data.size() / static_cast<std::size_t>(to - from);
    for (int i = 0; i < to - from; ++i) {
      Tensor p({1, t.dim(2), t.dim(3)}), m({1, t.dim(2), t.dim(3)});
      std::copy(pred.data.begin() + static_cast<std::size_t>(i) * plane,
                pred.data.begin() + static_cast<std::size_t>(i + 1) * plane, p.data.begin());
      std::copy(t.data.begin() + static_cast<std::size_t>(i) * plane,
                t.data.begin() + static_cast<std::size_t>(i + 1) * plane, m.data.begin());
      acc += iou(p, m);
    }
  }
  return acc / static_cast<double>(samples.size());
}

// Adam + BCE over the partition's training split; the per-epoch shuffle is
// driven by one LCG seeded with the partition seed. Records the mean
// per-sample loss of each epoch and the final per-image mean IoU on the test
// split. Deterministic for fixed (model, partition, dataset, options).
inline RunResult train_model(models::Model& model, const data::Partition& part,
                             const std::vector<data::Sample>& dataset,
                             const TrainOptions& opt) {
  std::map<std::string, const data::Sample*> by_id;
  for (const data::Sample& s : dataset) by_id[s.id] = &s;
  auto resolve = [&by_id](const std::vector<std::string>& ids) {
    std::vector<const data::Sample*> out;
    for (const std::string& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw std::invalid_argument("train: unknown sample id " + id);
      out.push_back(it->second);
    }
    return out;
  };
  const auto train_set = resolve(part.train_ids);
  const auto test_set = resolve(part.test_ids);

  int batch = opt.batch_size;
  if (batch > static_cast<int>(train_set.size())) {
    std::cerr << "warning: batch size " << batch << " exceeds training split ("
              << train_set.size() << " samples); using one smaller batch\n";
    batch = static_cast<int>(train_set.size());
  }

  auto params = model.params();
  std::vector<nn::AdamState> states;
  states.reserve(params.size());
  for (const models::ParamRef& p : params)
    states.emplace_back(p.tensor->data.size(), opt.lr);

  Rng shuffle_rng(static_cast<std::uint64_t>(part.seed));
  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  RunResult result;
  result.model_tag = models::variant_name(model.config.variant);
  result.scale = models::scale_name(model.config.scale);
  result.partition_seed = part.seed;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    long long seen = 0;
    for (int from = 0; from < static_cast<int>(train_set.size()); from += batch) {
      const int to = std::min<int>(from + batch, static_cast<int>(train_set.size()));
      Tensor x, t;
      detail::fill_batch(train_set, order, from, to, x, t);
      const Tensor pred = model.forward(x);
      Tensor grad;
      const double loss = nn::bce_loss(pred, t, &grad);
      model.zero_grad();
      model.backward(grad);
      for (std::size_t i = 0; i < params.size(); ++i)
        nn::adam_step(params[i].tensor->data, params[i].tensor->grad, states[i]);
      loss_sum += loss * (to - from);
      seen += to - from;
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(seen));
  }

  result.test_iou = evaluate_iou(model, test_set, batch);
  return result;
}

// ---------------------------------------------------------------------------
// The 10-partition protocol
// ---------------------------------------------------------------------------

struct ProtocolOptions {
  TrainOptions train;
  int n_partitions = 10;
  double train_fraction = 0.8;
  std::uint64_t base_seed = 1234;  // model k initializes with base_seed + k
  int threads = 1;
  std::string out_dir;  // empty: nothing written
  bool save_checkpoints = false;  // out_dir/model_p<k>.{json,bin}
};

inline void write_runs_csv(const std::string& path, const std::vector<RunResult>& runs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const int epochs = runs.empty() ? 0 : static_cast<int>(runs.front().epoch_losses.size());
  f << "variant,scale,partition_seed,test_iou";
  for (int e = 1; e <= epochs; ++e) f << ",loss_epoch_" << e;
  f << "\n";
  for (const RunResult& r : runs) {
    f << r.model_tag << "," << r.scale << "," << r.partition_seed << "," << fmt(r.test_iou);
    for (double l : r.epoch_losses) f << "," << fmt(l);
    f << "\n";
  }
}

inline void write_summary(const std::string& path, const SummaryStats& s,
                          const std::vector<std::pair<std::string, std::string>>& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : meta) f << k << ": " << v << "\n";
  f << "mean: " << fmt(s.mean) << "\n";
  f << "median_q2: " << fmt(s.median) << "\n";
  f << "upper_quartile_q1: " << fmt(s.upper_quartile) << "\n";
  f << "lower_quartile_q3: " << fmt(s.lower_quartile) << "\n";
  f << "iqr: " << fmt(s.iqr) << "\n";
  f << "whisker_high: " << fmt(s.whisker_high) << "\n";
  f << "whisker_low: " << fmt(s.whisker_low) << "\n";
  f << "outliers:";
  for (double o : s.outliers) f << " " << fmt(o);
  f << "\n";
}

// Trains one model per partition (optionally across threads; each run owns a
// private model, so results do not depend on scheduling) and aggregates the
// test IoUs. Partial results are flushed before rethrowing if a run fails.
inline std::pair<std::vector<RunResult>, SummaryStats> run_protocol(
    const models::ModelConfig& config, const std::vector<data::Sample>& dataset,
    const ProtocolOptions& opt) {
  std::vector<std::string> ids;
  for (const data::Sample& s : dataset) ids.push_back(s.id);
  const auto partitions = data::make_partitions(ids, opt.n_partitions, opt.train_fraction);

  std::vector<RunResult> results(partitions.size());
  std::vector<char> done(partitions.size(), 0);
  std::vector<std::string> errors(partitions.size());

  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

  auto run_one = [&](std::size_t k) {
    try {
      models::Model model =
          models::build_model(config, opt.base_seed + static_cast<std::uint64_t>(k));
      results[k] = train_model(model, partitions[k], dataset, opt.train);
      if (opt.save_checkpoints && !opt.out_dir.empty())
        models::save_checkpoint(model,
                                opt.out_dir + "/model_p" + std::to_string(partitions[k].seed));
      done[k] = 1;
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };

  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(partitions.size())));
  if (threads == 1) {
    for (std::size_t k = 0; k < partitions.size(); ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&run_one, &partitions, t, threads]() {
        for (std::size_t k = static_cast<std::size_t>(t); k < partitions.size();
             k += static_cast<std::size_t>(threads))
          run_one(k);
      });
    for (std::thread& th : pool) th.join();
  }

  std::vector<RunResult> completed;
  std::string first_error;
  for (std::size_t k = 0; k < partitions.size(); ++k) {
    if (done[k])
      completed.push_back(results[k]);
    else if (first_error.empty())
      first_error = "partition " + std::to_string(partitions[k].seed) + ": " + errors[k];
  }

  SummaryStats stats;
  std::vector<double> ious;
  for (const RunResult& r : completed) ious.push_back(r.test_iou);
  if (!ious.empty()) stats = aggregate_stats(ious);

  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    write_runs_csv(opt.out_dir + "/runs.csv", completed);
    if (!ious.empty())
      write_summary(opt.out_dir + "/summary.txt", stats,
                    {{"variant", models::variant_name(config.variant)},
                     {"scale", models::scale_name(config.scale)},
                     {"runs", std::to_string(completed.size())},
                     {"epochs", std::to_string(opt.train.epochs)},
                     {"batch_size", std::to_string(opt.train.batch_size)},
                     {"lr", fmt(opt.train.lr)},
                     {"iou_mode", "per_image_mean"}});
  }

  if (!first_error.empty())
    throw std::runtime_error("protocol aborted, partial results flushed: " + first_error);
  return {completed, stats};
}

}  // namespace qunet::harness
