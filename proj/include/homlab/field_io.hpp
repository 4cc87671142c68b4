#pragma once

#include "homlab/discretization.hpp"

#include <string>
#include <vector>

namespace homlab {

// Flat binary layout, little-endian:
//   char[4] "HLFD", uint32 version, uint32 rank, uint64 dims[rank],
//   float64 lo[rank], float64 hi[rank], float64 time, float64 data[prod(dims)]
// Data are row-major with the last dimension fastest.
struct FieldBlob {
    std::vector<std::uint64_t> dims;
    std::vector<double> lo;
    std::vector<double> hi;
    double time = 0.0;
    std::vector<double> data;
};

void write_field(const std::string& path, const FieldBlob& blob);
FieldBlob read_field(const std::string& path);

FieldBlob to_blob(const MacroField& f);
FieldBlob to_blob(const TwoScaleField& f);
FieldBlob to_blob(const std::vector<double>& values, const YGrid& y);
std::vector<double> cell_values_from_blob(const FieldBlob& blob, const YGrid& y);

std::string format_number(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& cells);
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;
    void save(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace homlab
