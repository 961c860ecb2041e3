#pragma once

#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "graphident/datagen.hpp"
#include "graphident/encoder.hpp"
#include "graphident/harness.hpp"
#include "graphident/solver.hpp"
#include "graphident/trainer.hpp"

namespace graphident::cli {

/// Reads fields of one JSON object, remembering which keys were consumed so
/// that leftovers can be reported as unknown fields.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& object, std::string prefix);

  template <typename T>
  void read(const std::string& key, T& target) {
    if (!object_.contains(key)) return;
    seen_.insert(key);
    try {
      target = object_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw_type(key);
    }
  }

  bool has(const std::string& key) const { return object_.contains(key); }
  FieldReader section(const std::string& key);
  /// Throws ConfigError naming the first key that was never read.
  void finish() const;
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  [[noreturn]] void throw_type(const std::string& key) const;

  const nlohmann::json& object_;
  std::string prefix_;
  std::set<std::string> seen_;
};

/// Parses a config file; an absent path yields an empty object.
nlohmann::json load_config(const std::optional<std::string>& path);

FormationSpec formation_spec(const nlohmann::json& doc, bool full_scale);
FlockingSpec flocking_spec(const nlohmann::json& doc, bool full_scale);

struct TrainRun {
  std::string dataset;
  std::optional<std::string> resume;   ///< checkpoint to continue from
  EncoderArchitecture arch;
  std::uint64_t init_seed = 0;
  TrainConfig train;
  bool timing = false;
};
TrainRun train_run(const nlohmann::json& doc, bool full_scale);

struct EvalRun {
  std::optional<std::string> checkpoint;   ///< unused by baseline
  std::optional<std::string> dataset;      ///< evaluate records instead of a grid
  FormationGrid grid;
  SolverConfig solver;
  bool dump_matrices = true;
};
/// `baseline` selects the baseline defaults for alpha and beta and allows
/// them to be set; model evaluation takes them from the encoder.
EvalRun eval_run(const nlohmann::json& doc, bool full_scale, bool baseline);

}  // namespace graphident::cli
