#pragma once

// Plain-text model checkpoints. Layout (whitespace separated tokens,
// numbers written with 17 significant digits so they read back exactly):
//
//   cvkaf-network 1
//   input_dim <n>
//   head <regression|magnitude_softmax|real_softmax>
//   real_valued <0|1>
//   dictionary none | dictionary <1d|2d> <size> <lo> <hi>
//   layers <L>
//   per layer:
//     layer <outputs> <inputs> <activation> <kernel>
//     weights <re im> x outputs*inputs
//     bias <re im> x outputs
//     modrelu_bias <b> x outputs                       (modrelu)
//     gamma <g>                                        (kafs)
//     alpha_re <a> x outputs*D  alpha_im <a> x ...     (split_kaf)
//     alpha <re im> x outputs*D*D                      (complex_kaf)
//   end
//
// The format version is the integer after the magic word; readers reject
// versions they do not know.

#include "cvkaf/network.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace cvkaf {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

void save_network(std::ostream& out, const Network& net);
Network load_network(std::istream& in);

void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

} // namespace cvkaf
