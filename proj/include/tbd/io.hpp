#pragma once

#include "tbd/core.hpp"
#include "tbd/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tbd {

/// Shortest representation that round-trips to the same double.
std::string format_double(double v);

/// Strict parsers; throw std::invalid_argument on trailing garbage.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

// --- measurement container ---------------------------------------------------
// Little-endian: "TBDZ", u32 version (1), u32 rows, u32 cols, u32 d, u32 K,
// f64 origin[2], f64 cell_extent[2], then K*rows*cols*d f64 in
// (k, row, col, component) order.

void write_measurements(std::ostream& os, const std::vector<MeasurementImage>& frames);
std::vector<MeasurementImage> read_measurements(std::istream& is);
void write_measurements(const std::filesystem::path& path, const std::vector<MeasurementImage>& frames);
std::vector<MeasurementImage> read_measurements(const std::filesystem::path& path);

// --- CSV ----------------------------------------------------------------------

/// Header plus rows; cells are kept as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a column; throws FormatMismatch when it is missing.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::filesystem::path& path);

/// run,k,id,px,py,vx,vy,gamma
void write_truth_csv(std::ostream& os, std::size_t run, const GroundTruth& truth);
/// Rows of one run; steps fixes K (steps without objects have no rows).
GroundTruth read_truth_csv(const std::filesystem::path& path, int steps);

struct EstimateRow {
    std::size_t run = 0;
    int k = 0;
    std::int64_t label = 0;
    double existence = 0.0;
    KinematicState state;
    bool declared = false;
};

/// run,k,label,existence,px,py,vx,vy,gamma,declared
void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows);
std::vector<EstimateRow> read_estimates_csv(const std::filesystem::path& path);

struct MetricsRow {
    std::size_t run = 0;
    int k = 0;
    double gospa = 0.0;
    double localization = 0.0;
    double missed = 0.0;
    double false_tracks = 0.0;
};

/// run,k,gospa,localization,missed,false
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

struct AggregateRow {
    int k = 0;
    double mean_gospa = 0.0;
    double stderr_gospa = 0.0;
};

/// k,mean_gospa,stderr
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

}  // namespace tbd
