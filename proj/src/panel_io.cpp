#include "fpca/panel_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fpca/errors.hpp"

namespace fpca {

std::string format_double(double x) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        double back;
        const auto res = std::from_chars(buf, buf + std::strlen(buf), back);
        if (res.ec == std::errc() && back == x) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_panel_csv(const SparsePanel& panel, std::ostream& out) {
    out << "subject,t,y\n";
    for (int i = 0; i < panel.n(); ++i) {
        std::vector<Observation> obs = panel.subjects[i];
        std::stable_sort(obs.begin(), obs.end(),
                         [](const Observation& a, const Observation& b) { return a.t < b.t; });
        for (const auto& ob : obs)
            out << i << ',' << format_double(ob.t) << ',' << format_double(ob.y) << '\n';
    }
}

void write_panel_csv_file(const SparsePanel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    write_panel_csv(panel, out);
}

namespace {

double parse_double_field(const std::string& field, long line_no, const char* what) {
    double value;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end) {
        std::ostringstream os;
        os << "line " << line_no << ": cannot parse " << what << " from '" << field << "'";
        throw DataError(os.str());
    }
    return value;
}

}  // namespace

SparsePanel read_panel_csv(std::istream& in) {
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw DataError("line 1: empty panel file, expected header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject,t,y")
        throw DataError("line 1: expected header 'subject,t,y', got '" + line + "'");

    // subjects keyed by id, ascending; ids need not be contiguous
    std::map<long, std::vector<Observation>> by_id;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            std::ostringstream os;
            os << "line " << line_no << ": expected 3 comma-separated fields, got '" << line
               << "'";
            throw DataError(os.str());
        }
        const std::string id_field = line.substr(0, c1);
        long id;
        const auto res =
            std::from_chars(id_field.data(), id_field.data() + id_field.size(), id);
        if (res.ec != std::errc() || res.ptr != id_field.data() + id_field.size()) {
            std::ostringstream os;
            os << "line " << line_no << ": cannot parse subject id from '" << id_field << "'";
            throw DataError(os.str());
        }
        Observation ob;
        ob.t = parse_double_field(line.substr(c1 + 1, c2 - c1 - 1), line_no, "time");
        ob.y = parse_double_field(line.substr(c2 + 1), line_no, "value");
        by_id[id].push_back(ob);
    }
    if (by_id.empty()) throw DataError("line 2: panel file holds no observations");

    SparsePanel panel;
    panel.subjects.reserve(by_id.size());
    for (auto& [id, obs] : by_id) {
        std::stable_sort(obs.begin(), obs.end(),
                         [](const Observation& a, const Observation& b) { return a.t < b.t; });
        panel.subjects.push_back(std::move(obs));
    }
    return panel;
}

SparsePanel read_panel_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open panel file: " + path);
    return read_panel_csv(in);
}

}  // namespace fpca
