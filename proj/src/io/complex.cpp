#include "nmd/io/complex.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nmd/model/chem.hpp"

namespace nmd::io {

static_assert(std::endian::native == std::endian::little, "binary complex format assumes a little-endian host");

bool ComplexRecord::has_velocities() const { return !trajectory.empty() && !trajectory.front().velocities.empty(); }

model::LigandState ComplexRecord::state_at(std::size_t t) const {
  if (t >= trajectory.size())
    throw std::out_of_range("snapshot " + std::to_string(t) + " out of range for " + id + " (" +
                            std::to_string(trajectory.size()) + " snapshots)");
  model::LigandState s;
  s.atomic_numbers = atomic_numbers;
  s.masses = masses;
  s.positions = trajectory[t].positions;
  s.velocities = trajectory[t].velocities;
  return s;
}

void ComplexRecord::validate() const {
  const auto fail = [&](const std::string& what) { throw std::invalid_argument("complex " + id + ": " + what); };
  if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) fail("id must be non-empty without whitespace");
  if (masses.size() != atomic_numbers.size()) fail("mass count differs from atom count");
  if (trajectory.empty()) fail("trajectory has no snapshots");
  for (std::size_t i = 0; i < atomic_numbers.size(); ++i) {
    if (!model::is_supported_element(atomic_numbers[i])) fail("unsupported element Z=" + std::to_string(atomic_numbers[i]));
    if (!(masses[i] > 0.0)) fail("non-positive mass at atom " + std::to_string(i));
  }
  protein.validate();
  const bool vel = has_velocities();
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& s = trajectory[t];
    if (s.positions.size() != atomic_numbers.size())
      fail("snapshot " + std::to_string(t) + " has " + std::to_string(s.positions.size()) + " positions, expected " +
           std::to_string(atomic_numbers.size()));
    if (vel ? s.velocities.size() != s.positions.size() : !s.velocities.empty())
      fail("snapshot " + std::to_string(t) + ": velocities must be present in all snapshots or none");
  }
  for (const auto& [k, v] : metadata) {
    if (k.empty() || k.find_first_of("\t\r\n") != std::string::npos) fail("metadata key '" + k + "' is not a single token");
    if (v.find_first_of("\r\n") != std::string::npos) fail("metadata value for '" + k + "' spans lines");
  }
}

bool ComplexRecord::operator==(const ComplexRecord& o) const {
  return id == o.id && atomic_numbers == o.atomic_numbers && masses == o.masses &&
         protein.residue_types == o.protein.residue_types && protein.n == o.protein.n && protein.ca == o.protein.ca &&
         protein.c == o.protein.c && trajectory == o.trajectory && metadata == o.metadata;
}

namespace {

void put_number(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

void put_vec(std::string& out, const Vec3& v) {
  for (int k = 0; k < 3; ++k) {
    out.push_back(' ');
    put_number(out, v[k]);
  }
}

// Line-oriented reader that knows where it is for error messages.
class TextReader {
 public:
  TextReader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ":" + std::to_string(line_no_) + " (byte offset " + std::to_string(line_start_) +
                      "): " + what);
  }

  // Next non-empty line split into whitespace tokens.
  std::vector<std::string_view> tokens(std::string_view expecting) {
    while (true) {
      if (pos_ >= text_.size()) {
        line_start_ = pos_;
        fail("unexpected end of file, expected " + std::string(expecting));
      }
      line_start_ = pos_;
      const auto nl = text_.find('\n', pos_);
      const auto end = nl == std::string_view::npos ? text_.size() : nl;
      line_ = text_.substr(pos_, end - pos_);
      if (!line_.empty() && line_.back() == '\r') line_.remove_suffix(1);
      pos_ = nl == std::string_view::npos ? text_.size() : nl + 1;
      ++line_no_;
      std::vector<std::string_view> out;
      std::size_t i = 0;
      while (i < line_.size()) {
        while (i < line_.size() && (line_[i] == ' ' || line_[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line_.size() && line_[j] != ' ' && line_[j] != '\t') ++j;
        if (j > i) out.push_back(line_.substr(i, j - i));
        i = j;
      }
      if (!out.empty()) return out;
    }
  }

  std::string_view raw_line() const { return line_; }

  std::vector<std::string_view> keyed(std::string_view key, std::size_t values) {
    auto t = tokens(key);
    if (t[0] != key) fail("expected '" + std::string(key) + "', found '" + std::string(t[0]) + "'");
    if (t.size() != values + 1)
      fail("'" + std::string(key) + "' takes " + std::to_string(values) + " value(s), found " + std::to_string(t.size() - 1));
    return t;
  }

  template <class T>
  T number(std::string_view tok, std::string_view field) const {
    T v{};
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
      fail("field " + std::string(field) + ": cannot parse '" + std::string(tok) + "'");
    return v;
  }

  bool at_end() {
    while (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == '\r' || text_[pos_] == ' ' || text_[pos_] == '\t'))
      ++pos_;
    return pos_ >= text_.size();
  }

 private:
  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  std::size_t line_no_ = 0;
  std::string_view line_;
};

Vec3 read_vec(const TextReader& r, const std::vector<std::string_view>& t, std::size_t at, std::string_view field) {
  return {r.number<double>(t[at], field), r.number<double>(t[at + 1], field), r.number<double>(t[at + 2], field)};
}

// Binary helpers.
template <class T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class BinaryReader {
 public:
  BinaryReader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + " (byte offset " + std::to_string(pos_) + "): " + what);
  }

  template <class T>
  T get(std::string_view field) {
    if (bytes_.size() - pos_ < sizeof(T)) fail("truncated while reading " + std::string(field));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::string_view field) {
    const auto len = get<std::uint32_t>(field);
    if (bytes_.size() - pos_ < len) fail("truncated while reading " + std::string(field));
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  Vec3 get_vec(std::string_view field) {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = get<double>(field);
    return v;
  }

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic{"NMDCBIN\0", 8};

// Guards counts read from untrusted headers before allocating.
std::size_t checked_count(std::uint64_t v, std::uint64_t limit, std::string_view field, const BinaryReader& r) {
  if (v > limit) r.fail(std::string(field) + " count " + std::to_string(v) + " exceeds the remaining file size");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string to_text(const ComplexRecord& rec) {
  rec.validate();
  std::string out;
  out += "nmd-complex " + std::to_string(kComplexFormatVersion) + "\n";
  out += "id " + rec.id + "\n";
  out += "units length=angstrom time=snapshot-interval\n";
  out += "atoms " + std::to_string(rec.atom_count()) + "\n";
  out += "residues " + std::to_string(rec.residue_count()) + "\n";
  out += "snapshots " + std::to_string(rec.snapshot_count()) + "\n";
  out += std::string("velocities ") + (rec.has_velocities() ? "1" : "0") + "\n";
  out += "meta " + std::to_string(rec.metadata.size()) + "\n";
  for (const auto& [k, v] : rec.metadata) out += k + "\t" + v + "\n";
  out += "ligand\n";
  for (std::size_t i = 0; i < rec.atom_count(); ++i) {
    out += std::to_string(rec.atomic_numbers[i]) + " ";
    put_number(out, rec.masses[i]);
    out += "\n";
  }
  out += "protein\n";
  for (std::size_t r = 0; r < rec.residue_count(); ++r) {
    out += model::residue_name(rec.protein.residue_types[r]);
    put_vec(out, rec.protein.n[r]);
    put_vec(out, rec.protein.ca[r]);
    put_vec(out, rec.protein.c[r]);
    out += "\n";
  }
  for (std::size_t t = 0; t < rec.snapshot_count(); ++t) {
    out += "snapshot " + std::to_string(t) + "\n";
    const auto& s = rec.trajectory[t];
    for (std::size_t i = 0; i < s.positions.size(); ++i) {
      std::string line;
      put_vec(line, s.positions[i]);
      if (!s.velocities.empty()) put_vec(line, s.velocities[i]);
      out.append(line, 1, std::string::npos);
      out += "\n";
    }
  }
  out += "end\n";
  return out;
}

ComplexRecord parse_text(std::string_view text, const std::string& source) {
  TextReader r(text, source);
  ComplexRecord rec;
  auto t = r.tokens("header");
  if (t[0] != "nmd-complex" || t.size() != 2) r.fail("not an nmd-complex file");
  const int version = r.number<int>(t[1], "version");
  if (version != kComplexFormatVersion)
    r.fail("unsupported format version " + std::to_string(version) + " (this build reads version " +
           std::to_string(kComplexFormatVersion) + ")");
  rec.id = std::string(r.keyed("id", 1)[1]);
  t = r.keyed("units", 2);
  if (t[1] != "length=angstrom" || t[2] != "time=snapshot-interval") r.fail("unsupported units");
  const auto n = r.number<std::size_t>(r.keyed("atoms", 1)[1], "atoms");
  const auto residues = r.number<std::size_t>(r.keyed("residues", 1)[1], "residues");
  const auto snaps = r.number<std::size_t>(r.keyed("snapshots", 1)[1], "snapshots");
  const auto vel_flag = r.number<int>(r.keyed("velocities", 1)[1], "velocities");
  if (vel_flag != 0 && vel_flag != 1) r.fail("field velocities must be 0 or 1");
  const bool vel = vel_flag == 1;
  const auto meta = r.number<std::size_t>(r.keyed("meta", 1)[1], "meta");
  for (std::size_t k = 0; k < meta; ++k) {
    r.tokens("metadata entry");
    const auto line = r.raw_line();
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) r.fail("metadata entry needs '<key>\\t<value>'");
    rec.metadata.emplace(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
  }
  r.keyed("ligand", 0);
  for (std::size_t i = 0; i < n; ++i) {
    t = r.tokens("ligand atom");
    if (t.size() != 2) r.fail("ligand atom " + std::to_string(i) + " needs '<Z> <mass>'");
    rec.atomic_numbers.push_back(r.number<int>(t[0], "atomic number"));
    rec.masses.push_back(r.number<double>(t[1], "mass"));
    if (!model::is_supported_element(rec.atomic_numbers.back()))
      r.fail("unsupported element Z=" + std::to_string(rec.atomic_numbers.back()));
  }
  r.keyed("protein", 0);
  for (std::size_t k = 0; k < residues; ++k) {
    t = r.tokens("residue");
    if (t.size() != 10) r.fail("residue " + std::to_string(k) + " needs a name and 9 coordinates");
    const int type = model::residue_type(t[0]);
    if (model::residue_name(type) != t[0]) r.fail("unknown residue name '" + std::string(t[0]) + "'");
    rec.protein.residue_types.push_back(type);
    rec.protein.n.push_back(read_vec(r, t, 1, "N"));
    rec.protein.ca.push_back(read_vec(r, t, 4, "CA"));
    rec.protein.c.push_back(read_vec(r, t, 7, "C"));
  }
  const std::size_t cols = vel ? 6 : 3;
  for (std::size_t s = 0; s < snaps; ++s) {
    t = r.keyed("snapshot", 1);
    if (r.number<std::size_t>(t[1], "snapshot index") != s) r.fail("snapshots out of order, expected " + std::to_string(s));
    Snapshot snap;
    for (std::size_t i = 0; i < n; ++i) {
      t = r.tokens("coordinates");
      if (t.size() != cols)
        r.fail("snapshot " + std::to_string(s) + " atom " + std::to_string(i) + " needs " + std::to_string(cols) + " numbers");
      snap.positions.push_back(read_vec(r, t, 0, "position"));
      if (vel) snap.velocities.push_back(read_vec(r, t, 3, "velocity"));
    }
    rec.trajectory.push_back(std::move(snap));
  }
  r.keyed("end", 0);
  if (!r.at_end()) r.fail("trailing content after 'end'");
  try {
    rec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
  return rec;
}

std::string to_binary(const ComplexRecord& rec) {
  rec.validate();
  std::string out(kMagic);
  put_raw<std::uint32_t>(out, kComplexFormatVersion);
  put_string(out, rec.id);
  put_raw<std::uint64_t>(out, rec.atom_count());
  put_raw<std::uint64_t>(out, rec.residue_count());
  put_raw<std::uint64_t>(out, rec.snapshot_count());
  put_raw<std::uint8_t>(out, rec.has_velocities() ? 1 : 0);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(rec.metadata.size()));
  for (const auto& [k, v] : rec.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  for (std::size_t i = 0; i < rec.atom_count(); ++i) {
    put_raw<std::int32_t>(out, rec.atomic_numbers[i]);
    put_raw<double>(out, rec.masses[i]);
  }
  for (std::size_t k = 0; k < rec.residue_count(); ++k) {
    put_raw<std::int32_t>(out, rec.protein.residue_types[k]);
    for (const auto* v : {&rec.protein.n[k], &rec.protein.ca[k], &rec.protein.c[k]})
      for (int a = 0; a < 3; ++a) put_raw<double>(out, (*v)[a]);
  }
  for (const auto& s : rec.trajectory) {
    for (const auto& p : s.positions)
      for (int a = 0; a < 3; ++a) put_raw<double>(out, p[a]);
    for (const auto& v : s.velocities)
      for (int a = 0; a < 3; ++a) put_raw<double>(out, v[a]);
  }
  return out;
}

ComplexRecord parse_binary(std::string_view bytes, const std::string& source) {
  BinaryReader r(bytes, source);
  if (bytes.substr(0, kMagic.size()) != kMagic) r.fail("missing binary complex magic");
  for (std::size_t k = 0; k < kMagic.size(); ++k) r.get<char>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kComplexFormatVersion)
    r.fail("unsupported format version " + std::to_string(version) + " (this build reads version " +
           std::to_string(kComplexFormatVersion) + ")");
  ComplexRecord rec;
  rec.id = r.get_string("id");
  const std::uint64_t remaining = bytes.size();
  const auto n = checked_count(r.get<std::uint64_t>("atoms"), remaining, "atom", r);
  const auto residues = checked_count(r.get<std::uint64_t>("residues"), remaining, "residue", r);
  const auto snaps = checked_count(r.get<std::uint64_t>("snapshots"), remaining, "snapshot", r);
  const auto vel_flag = r.get<std::uint8_t>("velocities");
  if (vel_flag > 1) r.fail("velocity flag must be 0 or 1");
  const auto meta = r.get<std::uint32_t>("meta count");
  for (std::uint32_t k = 0; k < meta; ++k) {
    auto key = r.get_string("metadata key");
    rec.metadata.emplace(std::move(key), r.get_string("metadata value"));
  }
  for (std::size_t i = 0; i < n; ++i) {
    rec.atomic_numbers.push_back(r.get<std::int32_t>("atomic number"));
    rec.masses.push_back(r.get<double>("mass"));
  }
  for (std::size_t k = 0; k < residues; ++k) {
    const auto at = r.offset();
    const int type = r.get<std::int32_t>("residue type");
    if (type < 0 || type >= static_cast<int>(model::kResidueVocab))
      throw FormatError(source + " (byte offset " + std::to_string(at) + "): residue type out of range");
    rec.protein.residue_types.push_back(type);
    rec.protein.n.push_back(r.get_vec("N"));
    rec.protein.ca.push_back(r.get_vec("CA"));
    rec.protein.c.push_back(r.get_vec("C"));
  }
  for (std::size_t s = 0; s < snaps; ++s) {
    Snapshot snap;
    for (std::size_t i = 0; i < n; ++i) snap.positions.push_back(r.get_vec("position"));
    if (vel_flag)
      for (std::size_t i = 0; i < n; ++i) snap.velocities.push_back(r.get_vec("velocity"));
    rec.trajectory.push_back(std::move(snap));
  }
  if (!r.done()) r.fail("trailing bytes after the last snapshot");
  try {
    rec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(source + ": " + e.what());
  }
  return rec;
}

void save_complex(const ComplexRecord& record, const std::filesystem::path& path, Encoding encoding) {
  const std::string bytes = encoding == Encoding::text ? to_text(record) : to_binary(record);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

ComplexRecord load_complex(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open complex file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  if (std::string_view(bytes).substr(0, kMagic.size()) == kMagic) return parse_binary(bytes, path.string());
  return parse_text(bytes, path.string());
}

std::vector<ComplexRecord> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("data directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == kTextExtension || ext == kBinaryExtension)) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ComplexRecord> out;
  for (const auto& p : files) out.push_back(load_complex(p));
  if (out.empty()) throw std::runtime_error("no complex files (*.nmdc, *.nmdb) in " + dir.string());
  return out;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("NMD_DATA_DIR"); env && *env) return env;
  return "data";
}

}  // namespace nmd::io
