#pragma once

#include <string>

#include "graphident/encoder.hpp"
#include "graphident/trainer.hpp"

// Checkpoints are JSON documents:
//
//   {
//     "format": "graphident-checkpoint", "version": 1,
//     "architecture": {"fc1": [...], "fc2": [...], "head": [...], "scale": b},
//     "seed": <init seed>,
//     "parameters": [...],
//     "trainer": {                       // optional
//       "step": k, "adam_m": [...], "adam_v": [...],
//       "active_graph": g, "active_record": r,
//       "dual": {"lambda": [...], "lambda_prev": [...], "omega": [...], "tau": t, "iter": i}
//     }
//   }
//
// "parameters" (and each Adam buffer) concatenates, in order, fc1, fc2,
// head_alpha and head_beta; within a stack layer by layer the weight matrix
// (fan_in x fan_out, row-major) followed by the bias (fan_out values).
// Doubles are printed in shortest round-trip form, so reading a written
// checkpoint reproduces every value bit for bit.

namespace graphident {

inline constexpr int kCheckpointVersion = 1;

void save_params(const std::string& path, const EncoderParams& params);
EncoderParams load_params(const std::string& path);

void save_train_state(const std::string& path, const TrainState& state);
/// Loads parameters and, when present, the optimizer state; a parameters-only
/// checkpoint yields a fresh optimizer state.
TrainState load_train_state(const std::string& path);

}  // namespace graphident
