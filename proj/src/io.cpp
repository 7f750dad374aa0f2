#include "tbd/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <system_error>

namespace tbd {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

namespace {

template <typename T>
T parse_number(std::string_view text, const char* what) {
    text = trim(text);
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("expected " + std::string(what) + ", got '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

double parse_double(std::string_view text) {
    const auto t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    return parse_number<double>(t, "a number");
}

std::int64_t parse_int(std::string_view text) {
    return parse_number<std::int64_t>(text, "an integer");
}

std::uint64_t parse_u64(std::string_view text) {
    return parse_number<std::uint64_t>(text, "an unsigned 64-bit integer");
}

// ---------------------------------------------------------------------------
// measurement container

namespace {

constexpr std::array<char, 4> kMagic{'T', 'B', 'D', 'Z'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffU);
    os.write(b.data(), b.size());
}

void put_f64(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xffU);
    os.write(b.data(), b.size());
}

template <std::size_t N>
std::array<unsigned char, N> get_bytes(std::istream& is) {
    std::array<unsigned char, N> b{};
    is.read(reinterpret_cast<char*>(b.data()), N);
    if (!is) throw FormatMismatch("measurement file is truncated");
    return b;
}

std::uint32_t get_u32(std::istream& is) {
    const auto b = get_bytes<4>(is);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

double get_f64(std::istream& is) {
    const auto b = get_bytes<8>(is);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return std::bit_cast<double>(v);
}

}  // namespace

void write_measurements(std::ostream& os, const std::vector<MeasurementImage>& frames) {
    if (frames.empty()) throw FormatMismatch("cannot write an empty measurement sequence");
    const GridGeometry& g = frames.front().geometry();
    const std::size_t d = frames.front().d();
    for (const auto& f : frames) {
        if (!(f.geometry() == g) || f.d() != d) throw FormatMismatch("frames disagree on geometry");
    }
    os.write(kMagic.data(), kMagic.size());
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(g.rows));
    put_u32(os, static_cast<std::uint32_t>(g.cols));
    put_u32(os, static_cast<std::uint32_t>(d));
    put_u32(os, static_cast<std::uint32_t>(frames.size()));
    put_f64(os, g.origin.x());
    put_f64(os, g.origin.y());
    put_f64(os, g.cell_extent.x());
    put_f64(os, g.cell_extent.y());
    for (const auto& f : frames) {
        for (double v : f.values()) put_f64(os, v);
    }
}

std::vector<MeasurementImage> read_measurements(std::istream& is) {
    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw FormatMismatch("not a TBDZ measurement file");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) throw FormatMismatch("unsupported TBDZ version " + std::to_string(version));
    GridGeometry g;
    g.rows = get_u32(is);
    g.cols = get_u32(is);
    const std::size_t d = get_u32(is);
    const std::size_t frames = get_u32(is);
    for (double* v : {&g.origin.x(), &g.origin.y(), &g.cell_extent.x(), &g.cell_extent.y()}) *v = get_f64(is);
    if (g.rows == 0 || g.cols == 0 || d == 0) throw FormatMismatch("TBDZ header has an empty dimension");

    std::vector<MeasurementImage> out;
    out.reserve(frames);
    for (std::size_t k = 0; k < frames; ++k) {
        MeasurementImage z(g, d);
        for (double& v : z.values()) v = get_f64(is);
        out.push_back(std::move(z));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FormatMismatch("trailing bytes after TBDZ payload");
    return out;
}

void write_measurements(const std::filesystem::path& path, const std::vector<MeasurementImage>& frames) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_measurements(os, frames);
}

std::vector<MeasurementImage> read_measurements(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatMismatch("cannot open " + path.string());
    return read_measurements(is);
}

// ---------------------------------------------------------------------------
// CSV

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw FormatMismatch("missing CSV column '" + std::string(name) + "'");
}

CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        for (auto c : split(line, ',')) cells.emplace_back(c);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size()) throw FormatMismatch("CSV row width differs from header: " + line);
        t.rows.push_back(std::move(cells));
    }
    if (first) throw FormatMismatch("CSV input has no header");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatMismatch("cannot open " + path.string());
    return read_csv(is);
}

namespace {

template <typename F>
auto field(const std::string& text, F&& parse, std::string_view column) {
    try {
        return parse(text);
    } catch (const std::invalid_argument& e) {
        throw FormatMismatch("column '" + std::string(column) + "': " + e.what());
    }
}

}  // namespace

void write_truth_csv(std::ostream& os, std::size_t run, const GroundTruth& truth) {
    os << "run,k,id,px,py,vx,vy,gamma\n";
    for (int k = 1; k <= truth.step_count(); ++k) {
        for (const auto& obj : truth.at(k)) {
            const auto& x = obj.state;
            os << run << ',' << k << ',' << obj.id << ',' << format_double(x.p.x()) << ',' << format_double(x.p.y())
               << ',' << format_double(x.v.x()) << ',' << format_double(x.v.y()) << ',' << format_double(x.gamma)
               << '\n';
        }
    }
}

GroundTruth read_truth_csv(const std::filesystem::path& path, int steps) {
    const CsvTable t = read_csv(path);
    const std::size_t ck = t.column("k"), cid = t.column("id"), cpx = t.column("px"), cpy = t.column("py"),
                      cvx = t.column("vx"), cvy = t.column("vy"), cg = t.column("gamma");
    GroundTruth truth;
    truth.steps.resize(static_cast<std::size_t>(steps));
    for (const auto& row : t.rows) {
        const auto k = field(row[ck], parse_int, "k");
        if (k < 1 || k > steps) {
            throw LengthMismatch("truth file " + path.string() + " has step " + std::to_string(k) + " outside 1.." +
                                 std::to_string(steps));
        }
        TruthObject obj;
        obj.id = static_cast<int>(field(row[cid], parse_int, "id"));
        obj.state.p = Vec2(field(row[cpx], parse_double, "px"), field(row[cpy], parse_double, "py"));
        obj.state.v = Vec2(field(row[cvx], parse_double, "vx"), field(row[cvy], parse_double, "vy"));
        obj.state.gamma = field(row[cg], parse_double, "gamma");
        truth.steps[static_cast<std::size_t>(k - 1)].push_back(obj);
    }
    return truth;
}

void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows) {
    os << "run,k,label,existence,px,py,vx,vy,gamma,declared\n";
    for (const auto& r : rows) {
        const auto& x = r.state;
        os << r.run << ',' << r.k << ',' << r.label << ',' << format_double(r.existence) << ','
           << format_double(x.p.x()) << ',' << format_double(x.p.y()) << ',' << format_double(x.v.x()) << ','
           << format_double(x.v.y()) << ',' << format_double(x.gamma) << ',' << (r.declared ? 1 : 0) << '\n';
    }
}

std::vector<EstimateRow> read_estimates_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t crun = t.column("run"), ck = t.column("k"), cl = t.column("label"), ce = t.column("existence"),
                      cpx = t.column("px"), cpy = t.column("py"), cvx = t.column("vx"), cvy = t.column("vy"),
                      cg = t.column("gamma"), cd = t.column("declared");
    std::vector<EstimateRow> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        EstimateRow r;
        r.run = field(row[crun], parse_u64, "run");
        r.k = static_cast<int>(field(row[ck], parse_int, "k"));
        r.label = field(row[cl], parse_int, "label");
        r.existence = field(row[ce], parse_double, "existence");
        r.state.p = Vec2(field(row[cpx], parse_double, "px"), field(row[cpy], parse_double, "py"));
        r.state.v = Vec2(field(row[cvx], parse_double, "vx"), field(row[cvy], parse_double, "vy"));
        r.state.gamma = field(row[cg], parse_double, "gamma");
        r.declared = field(row[cd], parse_int, "declared") != 0;
        out.push_back(r);
    }
    return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
    os << "run,k,gospa,localization,missed,false\n";
    for (const auto& r : rows) {
        os << r.run << ',' << r.k << ',' << format_double(r.gospa) << ',' << format_double(r.localization) << ','
           << format_double(r.missed) << ',' << format_double(r.false_tracks) << '\n';
    }
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
    os << "k,mean_gospa,stderr\n";
    for (const auto& r : rows) {
        os << r.k << ',' << format_double(r.mean_gospa) << ',' << format_double(r.stderr_gospa) << '\n';
    }
}

}  // namespace tbd
