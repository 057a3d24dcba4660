// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include "numprobe/embstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "numprobe/error.hpp"

namespace numprobe {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are not supported");

namespace {

constexpr char kEmbMagic[8] = {'N', 'U', 'M', 'E', 'M', 'B', '0', '1'};

std::string join_labels(const std::vector<Label>& labels) {
  std::ostringstream os;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) os << ", ";
    os << labels[i];
  }
  return os.str();
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

template <typename T>
void append_raw(std::vector<char>& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T read_raw(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

/// Encodes row-major values at `dtype`; reports whether narrowing lost information.
bool encode_values(const Matrix& values, DType dtype, std::vector<char>& out) {
  bool lossy = false;
  out.reserve(out.size() + static_cast<std::size_t>(values.size()) * dtype_size(dtype));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (dtype == DType::f32) {
        const auto f = static_cast<float>(v);
        lossy |= static_cast<double>(f) != v;
        append_raw(out, f);
      } else {
        append_raw(out, v);
      }
    }
  }
  return lossy;
}

Matrix decode_values(const char* data, std::size_t n, std::size_t d, DType dtype) {
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::size_t width = dtype_size(dtype);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const char* p = data + (i * d + j) * width;
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          dtype == DType::f32 ? static_cast<double>(read_raw<float>(p)) : read_raw<double>(p);
    }
  }
  return values;
}

/// Raw payload checks that must name the offending row in file order.
void check_payload(const Matrix& values, const std::vector<Label>& labels) {
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (!values.row(i).allFinite()) {
      throw DataError("non-finite value in row " + std::to_string(i) + " (label " +
                      std::to_string(labels[static_cast<std::size_t>(i)]) + ")");
    }
  }
}

}  // namespace

std::string_view to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(std::string_view text) {
  if (text == "f32") return DType::f32;
  if (text == "f64") return DType::f64;
  throw PreconditionError("unknown dtype '" + std::string(text) + "' (expected f32 or f64)");
}

std::string_view to_string(FileFormat format) {
  return format == FileFormat::emb1 ? "emb1" : "npy_pair";
}

FileFormat parse_file_format(std::string_view text) {
  if (text == "emb1") return FileFormat::emb1;
  if (text == "npy_pair" || text == "npy") return FileFormat::npy_pair;
  throw PreconditionError("unknown embedding format '" + std::string(text) + "'");
}

EmbeddingMatrix::EmbeddingMatrix(Matrix values, std::vector<Label> labels, std::string model_name,
                                 DType dtype_on_disk)
    : model_name_(std::move(model_name)), dtype_(dtype_on_disk) {
  if (labels.size() < 2) {
    throw PreconditionError("an embedding matrix needs at least 2 rows, got " +
                            std::to_string(labels.size()));
  }
  if (values.cols() < 1) throw PreconditionError("embedding dimension must be at least 1");
  if (static_cast<std::size_t>(values.rows()) != labels.size()) {
    throw PreconditionError("row count " + std::to_string(values.rows()) +
                            " does not match label count " + std::to_string(labels.size()));
  }
  check_payload(values, labels);

  std::vector<Label> out_of_range;
  for (Label l : labels) {
    if (l < 0 || l >= kMaxLabelExclusive) out_of_range.push_back(l);
  }
  if (!out_of_range.empty()) {
    throw DataError("labels outside [0, 1e9): " + join_labels(out_of_range));
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  std::vector<Label> duplicates;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const Label l = labels[order[i]];
    if (l == labels[order[i - 1]] && (duplicates.empty() || duplicates.back() != l)) {
      duplicates.push_back(l);
    }
  }
  if (!duplicates.empty()) throw DataError("duplicate labels: " + join_labels(duplicates));

  labels_.resize(labels.size());
  values_.resize(values.rows(), values.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    labels_[i] = labels[order[i]];
    values_.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(order[i]));
  }
}

std::optional<Eigen::Index> EmbeddingMatrix::find(Label label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) return std::nullopt;
  return static_cast<Eigen::Index>(it - labels_.begin());
}

EmbeddingMatrix EmbeddingMatrix::subset(std::span<const Label> labels) const {
  Matrix rows(static_cast<Eigen::Index>(labels.size()), dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto idx = find(labels[i]);
    if (!idx) throw PreconditionError("label " + std::to_string(labels[i]) + " not in matrix");
    rows.row(static_cast<Eigen::Index>(i)) = values_.row(*idx);
  }
  return {std::move(rows), {labels.begin(), labels.end()}, model_name_, dtype_};
}

EmbeddingMatrix EmbeddingMatrix::with_rows(std::span<const Label> labels, const Matrix& rows) const {
  if (rows.rows() != static_cast<Eigen::Index>(labels.size()) || rows.cols() != dim()) {
    throw PreconditionError("replacement rows have the wrong shape");
  }
  EmbeddingMatrix out = *this;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto idx = find(labels[i]);
    if (!idx) throw PreconditionError("label " + std::to_string(labels[i]) + " not in matrix");
    if (!rows.row(static_cast<Eigen::Index>(i)).allFinite()) {
      throw DataError("non-finite replacement row for label " + std::to_string(labels[i]));
    }
    out.values_.row(*idx) = rows.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

EmbeddingMatrix EmbeddingMatrix::with_values(Matrix values) const {
  if (values.rows() != rows()) throw PreconditionError("row count mismatch");
  return {std::move(values), labels_, model_name_, dtype_};
}

EmbeddingMatrix EmbeddingMatrix::with_labels(std::vector<Label> labels) const {
  return {values_, std::move(labels), model_name_, dtype_};
}

bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  return a.labels_ == b.labels_ && a.values_.rows() == b.values_.rows() &&
         a.values_.cols() == b.values_.cols() && a.values_ == b.values_ &&
         a.model_name_ == b.model_name_;
}

// ---------------------------------------------------------------------------
// EMB1
// ---------------------------------------------------------------------------

namespace {

EmbeddingMatrix load_emb1(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_file(path);
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kEmbMagic, 8) != 0) {
    throw FormatError(where + ": field 'magic' is not NUMEMB01");
  }
  const auto header_len = read_raw<std::uint32_t>(bytes.data() + 8);
  if (12 + static_cast<std::size_t>(header_len) > bytes.size()) {
    throw FormatError(where + ": field 'header_length' (" + std::to_string(header_len) +
                      ") exceeds file size");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": field 'header' is not valid JSON: " + e.what());
  }
  if (!header.is_object()) throw FormatError(where + ": field 'header' is not a JSON object");

  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!header.contains(name)) throw FormatError(where + ": missing field '" + name + "'");
    return header.at(name);
  };
  const auto& jn = field("n");
  const auto& jd = field("d");
  if (!jn.is_number_integer() || jn.get<std::int64_t>() < 0) {
    throw FormatError(where + ": field 'n' must be a non-negative integer");
  }
  if (!jd.is_number_integer() || jd.get<std::int64_t>() < 0) {
    throw FormatError(where + ": field 'd' must be a non-negative integer");
  }
  const auto& jdtype = field("dtype");
  if (!jdtype.is_string() || (jdtype != "f32" && jdtype != "f64")) {
    throw FormatError(where + ": field 'dtype' must be \"f32\" or \"f64\"");
  }
  const auto& jlabels = field("labels");
  if (!jlabels.is_array()) throw FormatError(where + ": field 'labels' must be an array");
  std::vector<Label> labels;
  labels.reserve(jlabels.size());
  for (const auto& l : jlabels) {
    if (!l.is_number_integer()) throw FormatError(where + ": field 'labels' holds a non-integer");
    labels.push_back(l.get<Label>());
  }
  std::string model;
  if (header.contains("model")) {
    if (!header["model"].is_string()) throw FormatError(where + ": field 'model' must be a string");
    model = header["model"].get<std::string>();
  }

  const auto n = jn.get<std::size_t>();
  const auto d = jd.get<std::size_t>();
  const DType dtype = parse_dtype(jdtype.get<std::string>());
  if (labels.size() != n) {
    throw FormatError(where + ": field 'labels' has " + std::to_string(labels.size()) +
                      " entries but 'n' is " + std::to_string(n));
  }
  const std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != n * d * dtype_size(dtype)) {
    throw FormatError(where + ": payload is " + std::to_string(payload) + " bytes, header fields 'n'/'d'/'dtype' imply " +
                      std::to_string(n * d * dtype_size(dtype)));
  }
  if (n < 2) throw FormatError(where + ": field 'n' must be at least 2");
  if (d < 1) throw FormatError(where + ": field 'd' must be at least 1");

  Matrix values = decode_values(bytes.data() + 12 + header_len, n, d, dtype);
  return {std::move(values), std::move(labels), std::move(model), dtype};
}

SaveInfo save_emb1(const EmbeddingMatrix& m, const std::filesystem::path& path, DType dtype) {
  nlohmann::ordered_json header;
  header["n"] = m.rows();
  header["d"] = m.dim();
  header["dtype"] = to_string(dtype);
  header["labels"] = std::vector<Label>(m.labels().begin(), m.labels().end());
  header["model"] = m.model_name();
  const std::string text = header.dump();

  std::vector<char> bytes(kEmbMagic, kEmbMagic + 8);
  append_raw(bytes, static_cast<std::uint32_t>(text.size()));
  bytes.insert(bytes.end(), text.begin(), text.end());
  SaveInfo info{dtype, encode_values(m.values(), dtype, bytes), {path}};
  write_file(path, bytes);
  return info;
}

}  // namespace

// ---------------------------------------------------------------------------
// NPY
// ---------------------------------------------------------------------------

namespace npy {

namespace {

constexpr char kNpyMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string dict_value(const std::string& header, const std::string& key,
                       const std::filesystem::path& path) {
  const std::string quoted = "'" + key + "'";
  auto pos = header.find(quoted);
  if (pos == std::string::npos) {
    throw FormatError("'" + path.string() + "': NPY header lacks field '" + key + "'");
  }
  pos = header.find(':', pos + quoted.size());
  if (pos == std::string::npos) {
    throw FormatError("'" + path.string() + "': NPY header field '" + key + "' has no value");
  }
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  std::size_t end = pos;
  if (end < header.size() && header[end] == '(') {
    end = header.find(')', end);
    if (end == std::string::npos) {
      throw FormatError("'" + path.string() + "': NPY field '" + key + "' is unterminated");
    }
    ++end;
  } else if (end < header.size() && header[end] == '\'') {
    end = header.find('\'', end + 1);
    if (end == std::string::npos) {
      throw FormatError("'" + path.string() + "': NPY field '" + key + "' is unterminated");
    }
    ++end;
  } else {
    while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
  }
  return header.substr(pos, end - pos);
}

std::size_t descr_width(const std::string& descr) {
  if (descr.size() < 3) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(descr.substr(2)));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

std::filesystem::path values_path(const std::filesystem::path& stem) {
  return stem.string() + ".values.npy";
}

std::filesystem::path labels_path(const std::filesystem::path& stem) {
  return stem.string() + ".labels.npy";
}

Array read(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_file(path);
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kNpyMagic, 6) != 0) {
    throw FormatError(where + ": NPY field 'magic' is invalid");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = read_raw<std::uint16_t>(bytes.data() + 8);
    offset = 10;
  } else if (major == 2 && bytes.size() >= 12) {
    header_len = read_raw<std::uint32_t>(bytes.data() + 8);
    offset = 12;
  } else {
    throw FormatError(where + ": NPY field 'version' " + std::to_string(major) + " unsupported");
  }
  if (offset + header_len > bytes.size()) {
    throw FormatError(where + ": NPY field 'header_len' exceeds file size");
  }
  const std::string header(bytes.data() + offset, header_len);

  Array array;
  std::string descr = dict_value(header, "descr", path);
  if (descr.size() < 2 || descr.front() != '\'' || descr.back() != '\'') {
    throw FormatError(where + ": NPY field 'descr' is not a string");
  }
  array.descr = descr.substr(1, descr.size() - 2);
  if (array.descr.size() < 3 || (array.descr[0] != '<' && array.descr[0] != '|')) {
    throw FormatError(where + ": NPY field 'descr' " + array.descr + " is not little-endian");
  }
  const std::string fortran = dict_value(header, "fortran_order", path);
  if (fortran != "False") {
    throw FormatError(where + ": NPY field 'fortran_order' must be False");
  }
  std::string shape = dict_value(header, "shape", path);
  if (shape.size() < 2 || shape.front() != '(') {
    throw FormatError(where + ": NPY field 'shape' is not a tuple");
  }
  std::stringstream ss(shape.substr(1, shape.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
    if (item.empty()) continue;
    try {
      array.shape.push_back(static_cast<std::size_t>(std::stoull(item)));
    } catch (const std::exception&) {
      throw FormatError(where + ": NPY field 'shape' holds '" + item + "'");
    }
  }

  const std::size_t width = descr_width(array.descr);
  if (width == 0) throw FormatError(where + ": NPY field 'descr' " + array.descr + " unsupported");
  std::size_t count = 1;
  for (auto s : array.shape) count *= s;
  const std::size_t data_offset = offset + header_len;
  if (bytes.size() - data_offset != count * width) {
    throw FormatError(where + ": NPY payload size does not match field 'shape'");
  }
  array.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_offset), bytes.end());
  return array;
}

void write(const std::filesystem::path& path, const Array& array) {
  std::string shape = "(";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    shape += std::to_string(array.shape[i]);
    shape += (array.shape.size() == 1 || i + 1 < array.shape.size()) ? "," : "";
    if (i + 1 < array.shape.size()) shape += " ";
  }
  shape += ")";
  std::string header =
      "{'descr': '" + array.descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
  // Pad so magic + version + length + header is a multiple of 64, ending in '\n'.
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<char> bytes(kNpyMagic, kNpyMagic + 6);
  bytes.push_back(1);
  bytes.push_back(0);
  append_raw(bytes, static_cast<std::uint16_t>(header.size()));
  bytes.insert(bytes.end(), header.begin(), header.end());
  bytes.insert(bytes.end(), array.bytes.begin(), array.bytes.end());
  write_file(path, bytes);
}

}  // namespace npy

namespace {

std::vector<Label> decode_labels(const npy::Array& a, const std::filesystem::path& path) {
  if (a.shape.size() != 1) {
    throw FormatError("'" + path.string() + "': labels array must be 1-D");
  }
  const char kind = a.descr[1];
  const std::size_t width = a.descr.size() >= 3 ? std::stoul(a.descr.substr(2)) : 0;
  if ((kind != 'i' && kind != 'u') || (width != 1 && width != 2 && width != 4 && width != 8)) {
    throw FormatError("'" + path.string() + "': labels dtype " + a.descr + " is not an integer");
  }
  std::vector<Label> labels(a.shape[0]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const char* p = a.bytes.data() + i * width;
    std::int64_t v = 0;
    if (kind == 'i') {
      switch (width) {
        case 1: v = read_raw<std::int8_t>(p); break;
        case 2: v = read_raw<std::int16_t>(p); break;
        case 4: v = read_raw<std::int32_t>(p); break;
        default: v = read_raw<std::int64_t>(p); break;
      }
    } else {
      std::uint64_t u = 0;
      switch (width) {
        case 1: u = read_raw<std::uint8_t>(p); break;
        case 2: u = read_raw<std::uint16_t>(p); break;
        case 4: u = read_raw<std::uint32_t>(p); break;
        default: u = read_raw<std::uint64_t>(p); break;
      }
      if (u > static_cast<std::uint64_t>(INT64_MAX)) {
        throw DataError("'" + path.string() + "': label at index " + std::to_string(i) + " overflows");
      }
      v = static_cast<std::int64_t>(u);
    }
    labels[i] = v;
  }
  return labels;
}

EmbeddingMatrix load_npy_pair(const std::filesystem::path& stem) {
  const auto vpath = npy::values_path(stem);
  const auto lpath = npy::labels_path(stem);
  const npy::Array values = npy::read(vpath);
  const npy::Array labels = npy::read(lpath);
  if (values.shape.size() != 2) {
    throw FormatError("'" + vpath.string() + "': values array must be 2-D");
  }
  DType dtype;
  if (values.descr == "<f4") {
    dtype = DType::f32;
  } else if (values.descr == "<f8") {
    dtype = DType::f64;
  } else {
    throw FormatError("'" + vpath.string() + "': values dtype " + values.descr +
                      " unsupported (expected <f4 or <f8)");
  }
  std::vector<Label> label_vec = decode_labels(labels, lpath);
  const std::size_t n = values.shape[0];
  const std::size_t d = values.shape[1];
  if (label_vec.size() != n) {
    throw FormatError("'" + lpath.string() + "': " + std::to_string(label_vec.size()) +
                      " labels for " + std::to_string(n) + " value rows");
  }
  if (n < 2) throw FormatError("'" + vpath.string() + "': need at least 2 rows");
  if (d < 1) throw FormatError("'" + vpath.string() + "': need at least 1 column");
  return {decode_values(values.bytes.data(), n, d, dtype), std::move(label_vec),
          stem.filename().string(), dtype};
}

SaveInfo save_npy_pair(const EmbeddingMatrix& m, const std::filesystem::path& stem, DType dtype) {
  npy::Array values;
  values.descr = dtype == DType::f32 ? "<f4" : "<f8";
  values.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.dim())};
  const bool lossy = encode_values(m.values(), dtype, values.bytes);

  npy::Array labels;
  labels.descr = "<i8";
  labels.shape = {static_cast<std::size_t>(m.rows())};
  for (Label l : m.labels()) append_raw(labels.bytes, static_cast<std::int64_t>(l));

  const auto vpath = npy::values_path(stem);
  const auto lpath = npy::labels_path(stem);
  npy::write(vpath, values);
  npy::write(lpath, labels);
  return {dtype, lossy, {vpath, lpath}};
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::emb1 ? load_emb1(path) : load_npy_pair(path);
}

SaveInfo save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                         FileFormat format, std::optional<DType> dtype) {
  const DType out = dtype.value_or(m.dtype_on_disk());
  return format == FileFormat::emb1 ? save_emb1(m, path, out) : save_npy_pair(m, path, out);
}

FileFormat detect_format(const std::filesystem::path& path) {
  if (std::filesystem::exists(npy::values_path(path))) return FileFormat::npy_pair;
  return FileFormat::emb1;
}

}  // namespace numprobe
