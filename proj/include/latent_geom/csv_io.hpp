#pragma once

#include "latent_geom/common.hpp"

#include <filesystem>

namespace lgeom {

/// One row vector per line, comma separated, shortest round-trip decimal form.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace lgeom
