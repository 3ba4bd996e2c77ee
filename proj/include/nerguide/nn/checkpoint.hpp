#ifndef NERGUIDE_NN_CHECKPOINT_HPP_
#define NERGUIDE_NN_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "nerguide/nn/tensor.hpp"

namespace nerguide::nn {

// Checkpoint layout: one JSON metadata line, a newline, then the raw tensor
// payload (row count, column count, values) for every tensor in collection
// order. Doubles are written verbatim, so a save/load cycle is bit-exact.

void write_tensors(std::ostream& out, const std::vector<Tensor*>& tensors);

// Shapes must match the current model exactly; mismatches raise DataError.
void read_tensors(std::istream& in, const std::vector<Tensor*>& tensors);

void save_checkpoint(const std::filesystem::path& path,
                     const nlohmann::json& metadata,
                     const std::vector<Tensor*>& tensors);

// Returns the metadata line; tensor values are loaded in place.
nlohmann::json load_checkpoint(const std::filesystem::path& path,
                               const std::vector<Tensor*>& tensors);

// Reads only the metadata line of a checkpoint.
nlohmann::json peek_checkpoint(const std::filesystem::path& path);

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_CHECKPOINT_HPP_
