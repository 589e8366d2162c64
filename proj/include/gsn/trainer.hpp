#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/checkpoint.hpp"
#include "gsn/config.hpp"
#include "gsn/corpus.hpp"
#include "gsn/model.hpp"
#include "gsn/optim.hpp"

namespace gsn {

template <typename T>
struct EpochRecord {
  int epoch = 0;
  T train_loss = T(0);
  T dev_loss = T(0);
};

struct TrainOptions {
  std::string checkpoint_dir;   // empty: keep everything in memory only
  std::ostream* log = nullptr;  // epoch lines: `epoch<TAB>train<TAB>dev`
  double stop_below = 0.0;      // >0: stop once epoch train loss drops under this
};

/// Adam training over per-session graphs. A batch is a list of sessions; its
/// loss is the mean of the per-session mean negative log-likelihoods, so
/// gradients are averaged, clipped by global norm, and applied once per
/// batch. Serial and deterministic under a fixed seed.
template <typename T>
class Trainer {
 public:
  Trainer(GsnModel<T>& model, const TrainOptions& opts = {})
      : model_(model), opts_(opts), rng_(model.hyper().seed) {
    AdamConfig<T> ac;
    ac.lr = T(model.hyper().lr);
    opt_ = Adam<T>(ac);
    opt_.reset(model.params());
  }

  int epochs_done() const { return epoch_; }
  T best_dev() const { return best_dev_; }

  /// Mean session loss without touching gradients or optimizer state.
  T evaluate(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw ConfigError("cannot evaluate an empty session list");
    T total = T(0);
    for (const Session& s : sessions) {
      Tape<T> tape;
      total += tape.scalar(model_.session_loss(tape, s, build_graph(s)));
    }
    return total / T(sessions.size());
  }

  /// Train until the configured epoch count, starting from wherever the
  /// current state (fresh or resumed) left off.
  std::vector<EpochRecord<T>> run(const std::vector<Session>& train_set,
                                  const std::vector<Session>& dev_set) {
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (dev_set.empty()) throw ConfigError("dev set is empty");
    const Hyperparams& hp = model_.hyper();

    std::vector<DialogueGraph> graphs;
    graphs.reserve(train_set.size());
    for (const Session& s : train_set) graphs.push_back(build_graph(s));

    std::vector<EpochRecord<T>> records;
    const int n = static_cast<int>(train_set.size());
    while (epoch_ < hp.epochs) {
      std::vector<int> order(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(next_uniform(rng_) * (i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }

      T epoch_sum = T(0);
      int cursor = 0;
      while (cursor < n) {
        const int batch = std::min(hp.batch_size, n - cursor);
        model_.params().zero_grads();
        for (int k = 0; k < batch; ++k) {
          const int idx = order[static_cast<std::size_t>(cursor + k)];
          Tape<T> tape;
          Var loss = model_.session_loss(tape, train_set[static_cast<std::size_t>(idx)],
                                         graphs[static_cast<std::size_t>(idx)]);
          epoch_sum += tape.scalar(loss);
          tape.backward(tape.scale(loss, T(1) / T(batch)));
        }
        model_.params().clip_grads(T(hp.clip_norm));
        opt_.step(model_.params());
        cursor += batch;
      }

      ++epoch_;
      EpochRecord<T> rec;
      rec.epoch = epoch_;
      rec.train_loss = epoch_sum / T(n);
      rec.dev_loss = evaluate(dev_set);
      records.push_back(rec);

      if (opts_.log) {
        (*opts_.log) << rec.epoch << '\t' << std::fixed << std::setprecision(6)
                     << static_cast<double>(rec.train_loss) << '\t'
                     << static_cast<double>(rec.dev_loss) << '\n';
        opts_.log->flush();
      }

      if (rec.dev_loss < best_dev_) {
        best_dev_ = rec.dev_loss;
        if (!opts_.checkpoint_dir.empty())
          save_registry_file(opts_.checkpoint_dir + "/best.ckpt", model_.params(), archive_version());
      }
      if (!opts_.checkpoint_dir.empty()) save_state(opts_.checkpoint_dir + "/last.ckpt");
      if (opts_.stop_below > 0.0 && static_cast<double>(rec.train_loss) < opts_.stop_below) break;
    }
    return records;
  }

  /// Write the full training state: parameters, progress counters, optimizer
  /// moments, and (alongside) the shuffle RNG.
  void save_state(const std::string& path) {
    ParamRegistry<T>& reg = model_.params();
    std::vector<std::pair<std::string, const Tensor<T>*>> entries;
    for (const Param<T>& p : reg) entries.push_back({p.name, &p.value});

    Tensor<T> epoch_t = Tensor<T>::from(Shape{1}, {T(epoch_)});
    Tensor<T> best_t = Tensor<T>::from(Shape{1}, {best_dev_});
    Tensor<T> step_t = Tensor<T>::from(Shape{1}, {T(opt_.step_count())});
    entries.push_back({"train.epoch", &epoch_t});
    entries.push_back({"train.best_dev", &best_t});
    entries.push_back({"opt.step", &step_t});
    for (int i = 0; i < reg.count(); ++i) {
      entries.push_back({"opt.m." + reg.at(i).name, &opt_.moments1()[static_cast<std::size_t>(i)]});
      entries.push_back({"opt.v." + reg.at(i).name, &opt_.moments2()[static_cast<std::size_t>(i)]});
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write checkpoint: " + path);
    write_archive(out, entries, archive_version());

    std::ofstream rng_out(path + ".rng");
    if (!rng_out) throw IOError("cannot write rng state: " + path + ".rng");
    rng_out << rng_;
  }

  /// Restore everything save_state wrote; continuing with run() reproduces an
  /// uninterrupted trajectory (exactly so in 64-bit mode).
  void load_state(const std::string& path) {
    ParamRegistry<T>& reg = model_.params();
    const auto entries = read_archive_file<T>(path);
    load_into_registry(entries, reg);

    const auto scalar_entry = [&](const std::string& name) -> T {
      for (const auto& e : entries)
        if (e.name == name) {
          if (e.tensor.size() != 1) throw CheckpointCorruptError(name + " must hold one value");
          return e.tensor[0];
        }
      throw CheckpointVersionError("archive lacks training state entry " + name);
    };
    epoch_ = static_cast<int>(scalar_entry("train.epoch"));
    best_dev_ = scalar_entry("train.best_dev");
    opt_.reset(reg);
    opt_.set_step_count(static_cast<std::int64_t>(scalar_entry("opt.step")));
    for (int i = 0; i < reg.count(); ++i) {
      bool found_m = false, found_v = false;
      for (const auto& e : entries) {
        if (e.name == "opt.m." + reg.at(i).name) {
          opt_.moments1()[static_cast<std::size_t>(i)] = e.tensor;
          found_m = true;
        } else if (e.name == "opt.v." + reg.at(i).name) {
          opt_.moments2()[static_cast<std::size_t>(i)] = e.tensor;
          found_v = true;
        }
      }
      if (!found_m || !found_v)
        throw CheckpointVersionError("archive lacks optimizer state for " + reg.at(i).name);
    }

    std::ifstream rng_in(path + ".rng");
    if (!rng_in) throw IOError("cannot open rng state: " + path + ".rng");
    rng_in >> rng_;
    if (!rng_in) throw CheckpointCorruptError("unreadable rng state in " + path + ".rng");
  }

 private:
  static constexpr int archive_version() {
    return sizeof(T) == sizeof(double) ? kCheckpointF64 : kCheckpointF32;
  }

  GsnModel<T>& model_;
  TrainOptions opts_;
  std::mt19937_64 rng_;
  Adam<T> opt_;
  int epoch_ = 0;
  T best_dev_ = std::numeric_limits<T>::infinity();
};

}  // namespace gsn
