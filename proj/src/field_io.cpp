#include "homlab/field_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace homlab {

namespace {

constexpr char kMagic[4] = {'H', 'L', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) schema_error("field file truncated");
    return v;
}

} // namespace

void write_field(const std::string& path, const FieldBlob& b)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) numerical_error("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(b.dims.size()));
    for (auto d : b.dims) put(out, d);
    for (auto v : b.lo) put(out, v);
    for (auto v : b.hi) put(out, v);
    put(out, b.time);
    out.write(reinterpret_cast<const char*>(b.data.data()), static_cast<std::streamsize>(b.data.size() * sizeof(double)));
}

FieldBlob read_field(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) schema_error("cannot open field file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) schema_error("'" + path + "' is not a field file");
    if (get<std::uint32_t>(in) != kVersion) schema_error("unsupported field file version");
    const auto rank = get<std::uint32_t>(in);
    FieldBlob b;
    std::uint64_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        b.dims.push_back(get<std::uint64_t>(in));
        total *= b.dims.back();
    }
    for (std::uint32_t i = 0; i < rank; ++i) b.lo.push_back(get<double>(in));
    for (std::uint32_t i = 0; i < rank; ++i) b.hi.push_back(get<double>(in));
    b.time = get<double>(in);
    b.data.resize(total);
    in.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) schema_error("field file truncated");
    return b;
}

FieldBlob to_blob(const MacroField& f)
{
    FieldBlob b;
    for (int d = 0; d < f.x.dim; ++d) {
        b.dims.push_back(static_cast<std::uint64_t>(f.x.ax[d].n));
        b.lo.push_back(f.x.ax[d].lo);
        b.hi.push_back(f.x.ax[d].hi);
    }
    b.time = f.t;
    b.data = f.v;
    return b;
}

FieldBlob to_blob(const TwoScaleField& f)
{
    FieldBlob b = to_blob(MacroField{f.x, {}, f.t});
    for (int d = 0; d < f.y.dim; ++d) {
        b.dims.push_back(static_cast<std::uint64_t>(f.y.n[d]));
        b.lo.push_back(0.0);
        b.hi.push_back(1.0);
    }
    b.data = f.v;
    return b;
}

FieldBlob to_blob(const std::vector<double>& values, const YGrid& y)
{
    FieldBlob b;
    for (int d = 0; d < y.dim; ++d) {
        b.dims.push_back(static_cast<std::uint64_t>(y.n[d]));
        b.lo.push_back(0.0);
        b.hi.push_back(1.0);
    }
    b.data = values;
    return b;
}

std::vector<double> cell_values_from_blob(const FieldBlob& b, const YGrid& y)
{
    if (b.dims.size() != static_cast<std::size_t>(y.dim)) schema_error("field rank does not match the cell grid");
    for (int d = 0; d < y.dim; ++d)
        if (b.dims[d] != static_cast<std::uint64_t>(y.n[d])) schema_error("field dims do not match the cell grid");
    return b.data;
}

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvWriter::row(const std::vector<std::string>& cells)
{
    rows_.push_back(cells);
}

void CsvWriter::row(const std::vector<double>& cells)
{
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_number(v));
    rows_.push_back(std::move(s));
}

std::string CsvWriter::str() const
{
    std::ostringstream os;
    const auto line = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
}

void CsvWriter::save(const std::string& path) const
{
    std::ofstream out(path);
    if (!out) numerical_error("cannot open '" + path + "' for writing");
    out << str();
}

} // namespace homlab
