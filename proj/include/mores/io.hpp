#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mores/error.hpp"
#include "mores/harness.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"

namespace mores::io {

/// Malformed data row; line is 1-based and counts the header.
class InputError : public std::runtime_error {
public:
    InputError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

struct CsvStream {
    std::size_t d = 0;
    std::size_t m = 0;
    std::vector<Sample> samples;
};

namespace detail {

/// Recognizes x1..xd,y1..ym and returns (d, m).
inline std::optional<std::pair<std::size_t, std::size_t>> parse_schema_header(const std::vector<std::string_view>& cols) {
    std::size_t d = 0;
    std::size_t m = 0;
    for (auto raw : cols) {
        std::string_view c = raw;
        while (!c.empty() && c.back() == ' ') c.remove_suffix(1);
        while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
        if (c.size() < 2) return std::nullopt;
        const char kind = c.front();
        std::size_t index = 0;
        const auto res = std::from_chars(c.data() + 1, c.data() + c.size(), index);
        if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) return std::nullopt;
        if (kind == 'x' && m == 0 && index == d + 1) {
            ++d;
        } else if (kind == 'y' && index == m + 1) {
            ++m;
        } else {
            return std::nullopt;
        }
    }
    if (d == 0 || m == 0) return std::nullopt;
    return std::pair{d, m};
}

}  // namespace detail

/// Reads the stream schema: optional header `x1,…,xd,y1,…,ym`, then one
/// sample per row. Explicit d/m override the header but must agree with the
/// column count. Throws Error(InvalidConfig) when the split cannot be
/// determined and InputError for malformed rows.
inline CsvStream read_csv(std::istream& in, std::optional<std::size_t> d_flag = std::nullopt,
                          std::optional<std::size_t> m_flag = std::nullopt) {
    CsvStream out;
    std::string line;
    std::size_t line_no = 0;
    bool shape_known = false;
    std::size_t columns = 0;

    const auto resolve_shape = [&](std::size_t ncols, std::optional<std::pair<std::size_t, std::size_t>> header) {
        columns = ncols;
        if (d_flag && *d_flag < 1) throw Error(ErrorKind::InvalidConfig, "d must be >= 1");
        if (m_flag && *m_flag < 1) throw Error(ErrorKind::InvalidConfig, "m must be >= 1");
        if (m_flag) {
            out.m = *m_flag;
            if (out.m >= ncols) throw Error(ErrorKind::InvalidConfig, "m: " + std::to_string(out.m) + " leaves no input columns");
            out.d = d_flag ? *d_flag : ncols - out.m;
        } else if (d_flag) {
            out.d = *d_flag;
            if (out.d >= ncols) throw Error(ErrorKind::InvalidConfig, "d: " + std::to_string(out.d) + " leaves no output columns");
            out.m = ncols - out.d;
        } else if (header) {
            out.d = header->first;
            out.m = header->second;
        } else {
            throw Error(ErrorKind::InvalidConfig, "m: required when the CSV header does not name x/y columns");
        }
        if (out.d + out.m != ncols) {
            throw Error(ErrorKind::InvalidConfig, "d + m = " + std::to_string(out.d + out.m) + " but the CSV has " +
                                                      std::to_string(ncols) + " columns");
        }
        shape_known = true;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto fields = split_commas(line);

        if (!shape_known) {
            bool numeric = true;
            for (auto f : fields) numeric = numeric && parse_double(f).has_value();
            if (!numeric) {
                resolve_shape(fields.size(), detail::parse_schema_header(fields));
                continue;
            }
            resolve_shape(fields.size(), std::nullopt);
        }

        if (fields.size() != columns) {
            throw InputError(line_no, "expected " + std::to_string(columns) + " fields, found " + std::to_string(fields.size()));
        }
        Sample s{Vector(out.d), Vector(out.m)};
        for (std::size_t k = 0; k < columns; ++k) {
            const auto v = parse_double(fields[k]);
            if (!v || !std::isfinite(*v)) {
                throw InputError(line_no, "field " + std::to_string(k + 1) + " is not a finite number");
            }
            (k < out.d ? s.x[k] : s.y[k - out.d]) = *v;
        }
        out.samples.push_back(std::move(s));
    }
    if (!shape_known) throw Error(ErrorKind::InvalidConfig, "input: CSV contains no rows");
    return out;
}

inline void write_csv(std::ostream& os, std::span<const Sample> samples) {
    if (samples.empty()) return;
    const std::size_t d = samples.front().x.size();
    const std::size_t m = samples.front().y.size();
    for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << 'x' << (i + 1);
    for (std::size_t j = 0; j < m; ++j) os << ",y" << (j + 1);
    os << '\n';
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < d; ++i) os << (i ? "," : "") << format_double(s.x[i]);
        for (std::size_t j = 0; j < m; ++j) os << ',' << format_double(s.y[j]);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using nlohmann::json;

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
        throw Error(ErrorKind::InvalidConfig, "matrix JSON must be a non-empty array of rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& r : j) {
        if (!r.is_array() || r.size() != cols) throw Error(ErrorKind::InvalidConfig, "matrix JSON rows are ragged");
        for (const auto& v : r) data.push_back(v.get<double>());
    }
    return Matrix(rows, cols, std::move(data));
}

inline json to_json(const HyperParams& hp) {
    return {{"alpha", hp.alpha}, {"beta", hp.beta}, {"rho", hp.rho},
            {"eta", hp.eta},     {"mu", hp.mu},     {"update_period", hp.update_period}};
}

/// One metrics record: t, abs_err, mae_avg_so_far and any diagnostics present.
inline json to_json(const RoundRecord& r) {
    json j = {{"t", r.t}, {"abs_err", r.abs_err}, {"mae_avg_so_far", r.mae_avg_so_far}};
    if (r.p_dist) j["p_dist"] = *r.p_dist;
    if (r.omega_eig_min) j["omega_eig_min"] = *r.omega_eig_min;
    if (r.omega_eig_max) j["omega_eig_max"] = *r.omega_eig_max;
    if (r.gamma_eig_min) j["gamma_eig_min"] = *r.gamma_eig_min;
    if (r.gamma_eig_max) j["gamma_eig_max"] = *r.gamma_eig_max;
    if (r.structure) {
        j["residual_correlation"] = to_json(r.structure->residual_correlation);
        j["coefficient_change_correlation"] = to_json(r.structure->coefficient_change_correlation);
    }
    return j;
}

inline void write_jsonl(std::ostream& os, const EvalReport& report) {
    for (const auto& r : report.rounds) os << to_json(r).dump() << '\n';
}

/// External prediction log: one JSON object per line, {"round": t, "prediction": [...]}.
/// Rounds must be 1..n in order.
inline std::vector<Vector> read_prediction_log(std::istream& in) {
    std::vector<Vector> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw InputError(line_no, "not valid JSON");
        }
        if (!j.is_object() || !j.contains("round") || !j.contains("prediction") || !j["prediction"].is_array()) {
            throw InputError(line_no, "expected {\"round\": t, \"prediction\": [...]}");
        }
        if (!j["round"].is_number_integer() || j["round"].get<long long>() != static_cast<long long>(out.size() + 1)) {
            throw InputError(line_no, "rounds must run 1, 2, ... in order");
        }
        Vector v;
        for (const auto& x : j["prediction"]) {
            if (!x.is_number()) throw InputError(line_no, "prediction entries must be numbers");
            v.push_back(x.get<double>());
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace mores::io
