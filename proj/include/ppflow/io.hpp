#pragma once

#include <string>
#include <vector>

#include "ppflow/bootstrap.hpp"
#include "ppflow/estimate.hpp"

namespace ppflow {

// Reads a delimited text file with a header row. `columns` selects and
// orders the coordinate columns; empty means all columns. Bounds are the
// data's bounding box.
PointPattern parse_points(const std::string& path,
                          const std::vector<std::string>& columns = {});

// Event CSV with header x1[,x2,...], one event per line.
void write_pattern_csv(const std::string& path, const PointPattern& pattern);

// Surface CSV with header x1[,x2],value in row-major grid order.
void write_surface_csv(const std::string& path, const GridSurface& surface);
GridSurface read_surface_csv(const std::string& path);

// Versioned JSON model archive; doubles are written with round-trip
// precision so save -> load reproduces every parameter bit-exactly.
void save_model(const std::string& path, const FittedIntensity& model);
FittedIntensity load_model(const std::string& path);

// Writes via a temporary file in the same directory, then renames.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace ppflow
