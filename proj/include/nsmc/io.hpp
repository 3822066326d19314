#pragma once

#include <filesystem>
#include <string>

#include "nsmc/grid.hpp"

namespace nsmc {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Writes `content` to `path` via a temporary file and rename, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Binary grid-field layout, little-endian:
///   int64 grid_n, float64 side, int64 n_times,
///   float64 times[n_times],
///   float64 samples[n_times][grid_n^3][C]   (z fastest)
/// The component count is implied by the file size.
template <int C>
void write_binary(const std::filesystem::path& path, const GridSeries<C>& s);

template <int C>
GridSeries<C> read_binary(const std::filesystem::path& path);

/// CSV with columns t,ix,iy,iz,ux,uy,uz.
void write_csv(const std::filesystem::path& path, const GridSeries<3>& s);
GridSeries<3> read_csv(const std::filesystem::path& path);

}  // namespace nsmc
