#include "graphident/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "graphident/errors.hpp"
#include "graphident/graph.hpp"

namespace graphident {

namespace {

constexpr const char* kMagic = "GRAPHIDENT-DATASET";

void put_double(std::string& buf, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    buf.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double get_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

/// Line-oriented reader over the header that tracks byte offsets.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  std::string line() {
    const std::size_t start = pos_;
    const std::size_t end = bytes_.find('\n', pos_);
    if (end == std::string::npos) throw SchemaError("truncated header", start);
    pos_ = end + 1;
    return bytes_.substr(start, end - start);
  }

  /// Reads "<key> <value>" and checks the key.
  std::string field(const std::string& key) {
    const std::size_t start = pos_;
    const std::string l = line();
    const auto space = l.find(' ');
    if (space == std::string::npos || l.substr(0, space) != key) {
      throw SchemaError("expected header field '" + key + "'", start);
    }
    return l.substr(space + 1);
  }

  long integer(const std::string& key) {
    const std::size_t start = pos_;
    const std::string v = field(key);
    try {
      std::size_t used = 0;
      const long out = std::stol(v, &used);
      if (used != v.size() || out < 0) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw SchemaError("header field '" + key + "' is not a non-negative integer", start);
    }
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_dataset(const std::string& path, const Dataset& data) {
  std::size_t n = 0, s = 0, d = 0;
  if (!data.records.empty()) {
    n = data.records.front().X.nodes();
    s = data.records.front().X.state_dim();
    d = data.records.front().X.window();
  }
  std::ostringstream header;
  header << kMagic << '\n' << "version " << kDatasetVersion << '\n';
  header << "n " << n << "\ns " << s << "\nd " << d << "\nrecords " << data.records.size() << '\n';
  for (const auto& [key, value] : data.spec) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw IoError("generator setting '" + key + "' cannot be stored in a header line");
    }
    header << "spec." << key << ' ' << value << '\n';
  }
  for (const auto& rec : data.records) {
    header << "meta " << rec.meta.graph_id << ' ' << rec.meta.window_index << ' ' << rec.meta.seed << '\n';
  }
  header << "end\n";

  std::string payload;
  const std::size_t m = n * (n > 0 ? n - 1 : 0) / 2;
  payload.reserve(data.records.size() * (n * s * d + m) * 8);
  for (const auto& rec : data.records) {
    if (rec.X.nodes() != n || rec.X.state_dim() != s || rec.X.window() != d) {
      throw DimensionError("all records in a dataset must share n, s and d");
    }
    if (rec.W.rows() != static_cast<Eigen::Index>(n)) throw DimensionError("record graph does not match n");
    for (double v : rec.X.values()) put_double(payload, v);
    const Eigen::VectorXd w = half_vectorize(rec.W);
    for (Eigen::Index e = 0; e < w.size(); ++e) put_double(payload, w(e));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  HeaderReader hr(bytes);
  if (hr.line() != kMagic) throw SchemaError("not a graphident dataset", 0);
  const long version = hr.integer("version");
  if (version != kDatasetVersion) {
    throw UnsupportedVersionError("unsupported dataset version " + std::to_string(version) + " (this build reads " +
                                  std::to_string(kDatasetVersion) + ")");
  }
  const auto n = static_cast<std::size_t>(hr.integer("n"));
  const auto s = static_cast<std::size_t>(hr.integer("s"));
  const auto d = static_cast<std::size_t>(hr.integer("d"));
  const auto count = static_cast<std::size_t>(hr.integer("records"));

  Dataset data;
  std::vector<RecordMeta> metas;
  while (true) {
    const std::size_t at = hr.offset();
    const std::string l = hr.line();
    if (l == "end") break;
    if (l.rfind("spec.", 0) == 0) {
      const auto space = l.find(' ');
      if (space == std::string::npos) throw SchemaError("malformed generator setting", at);
      data.spec.emplace_back(l.substr(5, space - 5), l.substr(space + 1));
    } else if (l.rfind("meta ", 0) == 0) {
      std::istringstream fields(l.substr(5));
      RecordMeta meta;
      if (!(fields >> meta.graph_id >> meta.window_index >> meta.seed)) throw SchemaError("malformed meta line", at);
      metas.push_back(meta);
    } else {
      throw SchemaError("unexpected header line '" + l + "'", at);
    }
  }
  if (metas.size() != count) throw SchemaError("meta line count does not match record count", hr.offset());

  const std::size_t m = n * (n > 0 ? n - 1 : 0) / 2;
  const std::size_t per_record = (n * s * d + m) * 8;
  std::size_t pos = hr.offset();
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t r = 0; r < count; ++r) {
    if (bytes.size() - pos < per_record) {
      throw SchemaError("truncated payload in record " + std::to_string(r), bytes.size());
    }
    std::vector<double> values(n * s * d);
    for (auto& v : values) {
      v = get_double(raw + pos);
      pos += 8;
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(m));
    for (Eigen::Index e = 0; e < w.size(); ++e) {
      w(e) = get_double(raw + pos);
      pos += 8;
    }
    data.records.push_back({TrajectoryTensor(n, s, d, std::move(values)),
                            devectorize(w, static_cast<Eigen::Index>(n)), metas[r]});
  }
  if (pos != bytes.size()) throw SchemaError("trailing bytes after last record", pos);
  return data;
}

void write_dataset_text(const std::string& path, const Dataset& data) {
  nlohmann::json doc;
  doc["format"] = "graphident-dataset-text";
  doc["version"] = kDatasetVersion;
  nlohmann::json spec = nlohmann::json::object();
  for (const auto& [k, v] : data.spec) spec[k] = v;
  doc["spec"] = spec;
  doc["records"] = nlohmann::json::array();
  for (const auto& rec : data.records) {
    nlohmann::json r;
    r["graph_id"] = rec.meta.graph_id;
    r["window_index"] = rec.meta.window_index;
    r["seed"] = rec.meta.seed;
    r["n"] = rec.X.nodes();
    r["s"] = rec.X.state_dim();
    r["d"] = rec.X.window();
    r["trajectory"] = rec.X.values();
    const Eigen::VectorXd w = half_vectorize(rec.W);
    r["weights"] = std::vector<double>(w.data(), w.data() + w.size());
    doc["records"].push_back(std::move(r));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(1) << '\n';
}

}  // namespace graphident
