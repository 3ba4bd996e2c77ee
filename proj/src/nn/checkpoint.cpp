#include "nerguide/nn/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include "nerguide/common.hpp"

namespace nerguide::nn {
namespace {

constexpr char kMagic[] = "ngckpt1";

void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int64_t read_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint truncated while reading a size field");
  return v;
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<Tensor*>& tensors) {
  write_i64(out, static_cast<std::int64_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    write_i64(out, t->value.rows());
    write_i64(out, t->value.cols());
    out.write(reinterpret_cast<const char*>(t->value.data()),
              static_cast<std::streamsize>(sizeof(double)) * t->value.size());
  }
  if (!out) throw DataError("failed while writing checkpoint tensors");
}

void read_tensors(std::istream& in, const std::vector<Tensor*>& tensors) {
  const std::int64_t count = read_i64(in);
  if (count != static_cast<std::int64_t>(tensors.size())) {
    throw DataError("checkpoint holds " + std::to_string(count) +
                    " tensors, model expects " +
                    std::to_string(tensors.size()));
  }
  for (Tensor* t : tensors) {
    const std::int64_t rows = read_i64(in);
    const std::int64_t cols = read_i64(in);
    if (rows != t->value.rows() || cols != t->value.cols()) {
      throw DataError("checkpoint tensor '" + t->name + "' has shape " +
                      std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model expects " + std::to_string(t->value.rows()) +
                      "x" + std::to_string(t->value.cols()));
    }
    in.read(reinterpret_cast<char*>(t->value.data()),
            static_cast<std::streamsize>(sizeof(double)) * t->value.size());
    if (!in) {
      throw DataError("checkpoint truncated inside tensor '" + t->name + "'");
    }
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     const nlohmann::json& metadata,
                     const std::vector<Tensor*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  nlohmann::json header = metadata;
  header["magic"] = kMagic;
  out << header.dump() << '\n';
  write_tensors(out, tensors);
  if (!out) throw DataError("failed while writing checkpoint " + path.string());
}

namespace {

nlohmann::json read_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("checkpoint " + path + " is empty");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path +
                    " has a malformed header: " + e.what());
  }
  if (header.value("magic", "") != kMagic) {
    throw DataError("file " + path + " is not a checkpoint");
  }
  return header;
}

}  // namespace

nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               const std::vector<Tensor*>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  nlohmann::json header = read_header(in, path.string());
  read_tensors(in, tensors);
  return header;
}

nlohmann::json peek_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_header(in, path.string());
}

}  // namespace nerguide::nn
