#pragma once

// Reader for the big-endian IDX format used by MNIST-family digit datasets.
// Images: magic 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8.
// Labels: magic 0x00000801, u32 count, count u8.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "faros/data.hpp"
#include "faros/errors.hpp"

namespace faros {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& path) {
  if (offset + 4 > buf.size()) throw FormatError(path + ": truncated header", offset);
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Loads an IDX3 image file and its IDX1 label file. Pixels are scaled by
/// 1/255 and flattened row-major.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file_bytes(images_path);
  const auto lab = detail::read_file_bytes(labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != kIdxImagesMagic) throw FormatError(images_path + ": bad IDX3 magic", 0);
  const std::uint32_t n_img = detail::read_be32(img, 4, images_path);
  const std::uint32_t rows = detail::read_be32(img, 8, images_path);
  const std::uint32_t cols = detail::read_be32(img, 12, images_path);

  const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic) throw FormatError(labels_path + ": bad IDX1 magic", 0);
  const std::uint32_t n_lab = detail::read_be32(lab, 4, labels_path);
  if (n_lab != n_img)
    throw FormatError(labels_path + ": label count " + std::to_string(n_lab) +
                          " does not match image count " + std::to_string(n_img),
                      4);

  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t img_need = 16 + pixels * n_img;
  if (img.size() < img_need) throw FormatError(images_path + ": truncated pixel data", img.size());
  if (lab.size() < 8 + std::size_t{n_lab})
    throw FormatError(labels_path + ": truncated label data", lab.size());

  Dataset out;
  out.reserve(n_img);
  for (std::size_t i = 0; i < n_img; ++i) {
    Example e;
    e.label = lab[8 + i];
    e.features.resize(pixels);
    const std::size_t base = 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) e.features[p] = img[base + p] / 255.0;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace faros
