#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "softjpeg/raster.hpp"
#include "softjpeg/util.hpp"

namespace softjpeg {

/// One overlapping patch per 8x8 code block. Patches are patch_size x
/// patch_size at stride 8, shifted inward at the right/bottom edges so each
/// patch stays inside the padded field while still enclosing its block.
class PatchLayout {
 public:
  PatchLayout(int pad_w, int pad_h, int patch_size = 10)
      : pad_w_(pad_w), pad_h_(pad_h), patch_(patch_size) {
    if (pad_w % 8 || pad_h % 8) throw Error("patch layout needs dimensions padded to 8");
    if (patch_size < 8) throw Error("patch size must enclose an 8x8 block");
    if (pad_w < patch_size || pad_h < patch_size) throw Error("image smaller than patch size");
    blocks_x_ = pad_w / 8;
    blocks_y_ = pad_h / 8;
  }

  int patch_size() const { return patch_; }
  int blocks_x() const { return blocks_x_; }
  int blocks_y() const { return blocks_y_; }
  int count() const { return blocks_x_ * blocks_y_; }
  int dim() const { return patch_ * patch_; }

  std::pair<int, int> origin(int bx, int by) const {
    return {std::min(8 * bx, pad_w_ - patch_), std::min(8 * by, pad_h_ - patch_)};
  }

  /// Row-major indices of block (bx,by)'s 64 pixels inside its own patch.
  std::array<int, 64> block_indices(int bx, int by) const {
    auto [x0, y0] = origin(bx, by);
    int ox = 8 * bx - x0, oy = 8 * by - y0;
    std::array<int, 64> idx{};
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) idx[r * 8 + c] = (oy + r) * patch_ + (ox + c);
    return idx;
  }

  /// Patches in block raster order, each flattened row-major.
  std::vector<Eigen::VectorXd> extract(const RasterF64& field) const {
    check_dims(field);
    std::vector<Eigen::VectorXd> patches;
    patches.reserve(static_cast<std::size_t>(count()));
    for (int by = 0; by < blocks_y_; ++by)
      for (int bx = 0; bx < blocks_x_; ++bx) {
        auto [x0, y0] = origin(bx, by);
        Eigen::VectorXd p(dim());
        for (int r = 0; r < patch_; ++r)
          for (int c = 0; c < patch_; ++c) p[r * patch_ + c] = field.at(x0 + c, y0 + r);
        patches.push_back(std::move(p));
      }
    return patches;
  }

  /// Per-pixel mean of all covering patches, accumulated in block raster
  /// order. The order is fixed so reassembly is bit-reproducible.
  RasterF64 assemble(const std::vector<Eigen::VectorXd>& patches) const {
    if (patches.size() != static_cast<std::size_t>(count()))
      throw Error("patch count does not match layout");
    RasterF64 sum(pad_w_, pad_h_);
    RasterF64 cover(pad_w_, pad_h_);
    std::size_t i = 0;
    for (int by = 0; by < blocks_y_; ++by)
      for (int bx = 0; bx < blocks_x_; ++bx, ++i) {
        auto [x0, y0] = origin(bx, by);
        const Eigen::VectorXd& p = patches[i];
        if (p.size() != dim()) throw Error("patch dimension does not match layout");
        for (int r = 0; r < patch_; ++r)
          for (int c = 0; c < patch_; ++c) {
            sum.at(x0 + c, y0 + r) += p[r * patch_ + c];
            cover.at(x0 + c, y0 + r) += 1.0;
          }
      }
    RasterF64 out(pad_w_, pad_h_);
    for (std::size_t k = 0; k < out.data().size(); ++k)
      out.data()[k] = sum.data()[k] / cover.data()[k];
    return out;
  }

 private:
  void check_dims(const RasterF64& field) const {
    if (field.width() != pad_w_ || field.height() != pad_h_)
      throw Error("field dimensions do not match layout");
  }

  int pad_w_, pad_h_, patch_;
  int blocks_x_, blocks_y_;
};

}  // namespace softjpeg
