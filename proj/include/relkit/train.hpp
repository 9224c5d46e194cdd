#pragma once

#include <algorithm>
#include <exception>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "relkit/adam.hpp"
#include "relkit/checkpoint.hpp"
#include "relkit/metrics.hpp"
#include "relkit/model.hpp"

namespace relkit {

struct TrainResult {
  std::vector<double> epoch_mean_loss;
  std::int64_t steps = 0;
};

namespace detail {

// Worker threads each own a disjoint slice of the batch; results land in
// per-sample slots so the reduction below runs in sample-index order
// regardless of thread count. Worker exceptions are captured and rethrown
// on the calling thread, lowest sample index first.
inline void batch_gradients(const Model& model,
                            const std::vector<const PreparedSample*>& batch, int threads,
                            std::vector<double>& losses, std::vector<GradientMap>& grads) {
  const std::size_t n = batch.size();
  losses.assign(n, 0.0);
  grads.assign(n, GradientMap{});
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        losses[i] = model.loss_and_grads(*batch[i], grads[i]);
      } catch (const NumericError& e) {
        errors[i] = std::make_exception_ptr(
            NumericError("batch sample " + std::to_string(i) + ": " + e.what()));
      } catch (const Error& e) {
        errors[i] = std::make_exception_ptr(
            Error("batch sample " + std::to_string(i) + ": " + e.what()));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(threads, static_cast<int>(n));
  if (workers <= 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

}  // namespace detail

// Adam training over per-sample graphs. Batch loss is the mean of
// per-sample L_r; gradient reduction is in sample order, so the run is
// deterministic for a given seed also when threads > 1. The loss trace is
// one JSON record per epoch.
inline TrainResult train(Model& model, const std::vector<Sample>& corpus,
                         std::ostream* trace = nullptr) {
  const TrainConfig& cfg = model.config();
  if (corpus.empty()) throw Error("train: empty corpus");
  for (const Sample& s : corpus) {
    for (const Triplet& t : s.triplets) {
      if (!model.schema().contains(t.relation)) {
        throw Error("train: relation " + t.relation + " not covered by schema");
      }
    }
  }

  std::vector<PreparedSample> prepared;
  prepared.reserve(corpus.size());
  for (const Sample& s : corpus) prepared.push_back(model.prepare(s));

  Adam optimizer({cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  Rng shuffle_rng(cfg.seed ^ 0x7261656c6b697473ull);  // distinct stream from init

  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::vector<double> losses;
  std::vector<GradientMap> grads;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const PreparedSample*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&prepared[order[i]]);

      const std::string where = "train: epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(result.steps + 1) + ": ";
      try {
        detail::batch_gradients(model, batch, cfg.threads, losses, grads);

        GradientMap total = model.zero_grads();
        for (const GradientMap& g : grads) {
          for (const auto& [name, tensor] : g) total.at(name) += tensor;
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (auto& [name, tensor] : total) tensor *= inv;
        optimizer.step(model.params(), total);
      } catch (const NumericError& e) {
        throw NumericError(where + e.what());
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
      ++result.steps;
      for (double l : losses) epoch_loss += l;
    }
    epoch_loss /= static_cast<double>(prepared.size());
    result.epoch_mean_loss.push_back(epoch_loss);
    if (trace) {
      nlohmann::json rec{{"epoch", epoch}, {"loss", epoch_loss}};
      *trace << rec.dump() << "\n";
    }
  }
  return result;
}

// Exact-match evaluation: a prediction is a true positive iff (relation,
// head entity, tail entity) equals a gold triplet of the sample. Buckets
// follow the overlap/multiplicity taxonomy; EPO and SEO may both count the
// same sample.
inline MetricsReport evaluate(const Model& model, const std::vector<Sample>& corpus,
                              double threshold) {
  MetricsReport report;
  for (const Sample& sample : corpus) {
    for (const Triplet& t : sample.triplets) {
      if (!model.schema().contains(t.relation)) {
        throw Error("evaluate: relation " + t.relation + " not in checkpoint schema");
      }
    }
    BucketCounts counts;
    counts.samples = 1;
    std::set<Triplet> gold(sample.triplets.begin(), sample.triplets.end());
    for (const TripletPrediction& pred : model.predict(sample, threshold)) {
      const Triplet as_triplet{model.schema().name(pred.relation), pred.head, pred.tail};
      if (gold.erase(as_triplet) > 0) {
        ++counts.tp;
      } else {
        ++counts.fp;
      }
    }
    counts.fn = static_cast<long>(gold.size());

    const OverlapTags tags = classify_overlap(sample);
    if (tags.normal()) report.normal += counts;
    if (tags.epo) report.epo += counts;
    if (tags.seo) report.seo += counts;
    switch (classify_multiplicity(sample)) {
      case Multiplicity::kSingle: report.single += counts; break;
      case Multiplicity::kDouble: report.double_ += counts; break;
      case Multiplicity::kMultiple: report.multiple += counts; break;
    }
    report.all += counts;
  }
  return report;
}

}  // namespace relkit
