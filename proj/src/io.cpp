#include "nsmc/io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

namespace nsmc {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

template <class T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated field file: " + path.string());
  return v;
}

}  // namespace

template <int C>
void write_binary(const std::filesystem::path& path, const GridSeries<C>& s) {
  std::string buf;
  buf.reserve(24 + 8 * (s.times().size() + s.values().size()));
  put<std::int64_t>(buf, s.grid().n);
  put<double>(buf, s.grid().side);
  put<std::int64_t>(buf, static_cast<std::int64_t>(s.time_count()));
  for (double t : s.times()) put(buf, t);
  for (double v : s.values()) put(buf, v);
  write_file_atomic(path, buf);
}

template <int C>
GridSeries<C> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open field file: " + path.string());
  const auto n = get<std::int64_t>(in, path);
  const auto side = get<double>(in, path);
  const auto nt = get<std::int64_t>(in, path);
  if (n < 4 || n > 4096 || nt < 1 || nt > (1 << 24)) throw DataError("corrupt field header: " + path.string());
  const PeriodicGrid grid(static_cast<int>(n), side);
  std::vector<double> times(static_cast<std::size_t>(nt));
  for (auto& t : times) t = get<double>(in, path);
  const std::size_t expected = static_cast<std::size_t>(nt) * grid.size() * C;
  std::vector<double> values(expected);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected * sizeof(double)));
  if (!in) throw DataError("field file has fewer samples than its header implies: " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("field file has trailing data (component count mismatch?): " + path.string());
  }
  return GridSeries<C>(grid, std::move(times), std::move(values));
}

template void write_binary<1>(const std::filesystem::path&, const GridSeries<1>&);
template void write_binary<3>(const std::filesystem::path&, const GridSeries<3>&);
template void write_binary<9>(const std::filesystem::path&, const GridSeries<9>&);
template GridSeries<1> read_binary<1>(const std::filesystem::path&);
template GridSeries<3> read_binary<3>(const std::filesystem::path&);
template GridSeries<9> read_binary<9>(const std::filesystem::path&);

void write_csv(const std::filesystem::path& path, const GridSeries<3>& s) {
  std::string out = "t,ix,iy,iz,ux,uy,uz\n";
  const auto& g = s.grid();
  for (std::size_t ti = 0; ti < s.time_count(); ++ti) {
    const std::string t = format_double(s.times()[ti]);
    for (std::size_t node = 0; node < g.size(); ++node) {
      const auto c = g.coords(node);
      const auto v = s.at(ti, node);
      out += t;
      for (int a : c) (out += ',') += std::to_string(a);
      for (double x : v) (out += ',') += format_double(x);
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

GridSeries<3> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,ix,iy,iz,ux,uy,uz", 0) != 0) throw DataError("unexpected CSV header in " + path.string());
  struct Row {
    int ix, iy, iz;
    double u[3];
  };
  std::map<double, std::vector<Row>> by_time;
  int max_index = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double vals[7];
    for (int i = 0; i < 7; ++i) {
      if (!std::getline(ss, cell, ',')) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 7 columns");
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), vals[i]);
      if (res.ec != std::errc()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
    Row r{static_cast<int>(vals[1]), static_cast<int>(vals[2]), static_cast<int>(vals[3]), {vals[4], vals[5], vals[6]}};
    max_index = std::max({max_index, r.ix, r.iy, r.iz});
    by_time[vals[0]].push_back(r);
  }
  if (by_time.empty()) throw DataError("CSV has no rows: " + path.string());
  // The CSV carries indices only; the periodic side defaults to 2*pi.
  const PeriodicGrid grid(max_index + 1, 2.0 * std::numbers::pi);
  std::vector<double> times;
  std::vector<double> values;
  for (const auto& [t, rows] : by_time) {
    if (rows.size() != grid.size()) throw DataError("CSV time slice " + format_double(t) + " is incomplete");
    times.push_back(t);
    const std::size_t base = values.size();
    values.resize(base + grid.size() * 3);
    for (const auto& r : rows) {
      for (int c = 0; c < 3; ++c) values[base + grid.index(r.ix, r.iy, r.iz) * 3 + static_cast<std::size_t>(c)] = r.u[c];
    }
  }
  return GridSeries<3>(grid, std::move(times), std::move(values));
}

}  // namespace nsmc
