#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graphident/datagen.hpp"

// Dataset container, format version 1.
//
//   GRAPHIDENT-DATASET\n
//   version 1\n
//   n <nodes>\n s <state dim>\n d <window>\n records <count>\n
//   spec.<key> <value>\n          (zero or more generator settings)
//   meta <graph_id> <window_index> <seed>\n   (one line per record)
//   end\n
//   <payload>
//
// The payload is `records` blocks of little-endian IEEE-754 doubles: the
// trajectory in (node, component, time) row-major order (n*s*d values),
// then vech(W) in strict-upper-triangle row-major order (n(n-1)/2 values).

namespace graphident {

inline constexpr int kDatasetVersion = 1;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct Dataset {
  KeyValues spec;
  std::vector<SampleRecord> records;
};

/// All records must share n, s and d.
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

/// Human-readable JSON export of the same content, for debugging.
void write_dataset_text(const std::string& path, const Dataset& data);

}  // namespace graphident
