#include "s2l/georesolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "s2l/csv.hpp"
#include "s2l/error.hpp"
#include "s2l/image.hpp"
#include "s2l/utf8.hpp"

namespace s2l::georesolve {

bool same_tuple(const GeoTuple& a, const GeoTuple& b) {
  return a.pincode == b.pincode && std::abs(a.latitude - b.latitude) <= kCoordTolerance &&
         std::abs(a.longitude - b.longitude) <= kCoordTolerance;
}

bool tuple_less(const GeoTuple& a, const GeoTuple& b) {
  if (a.pincode != b.pincode) return a.pincode < b.pincode;
  if (a.latitude != b.latitude) return a.latitude < b.latitude;
  return a.longitude < b.longitude;
}

Gazetteer::Gazetteer(std::vector<CsdbRecord> csdb, std::vector<LldbRecord> lldb,
                     std::vector<RldbRecord> rldb)
    : csdb_(std::move(csdb)), lldb_(std::move(lldb)), rldb_(std::move(rldb)) {
  for (std::size_t i = 0; i < csdb_.size(); ++i) {
    const auto& r = csdb_[i];
    if (r.pincode < 100000 || r.pincode > 999999) throw Error("pincode out of range: " + std::to_string(r.pincode));
    if (utf8::normalize_space(r.taluk).empty()) throw Error("CSDB row with empty taluk");
    taluk_index_[utf8::lookup_key(r.taluk)].push_back(i);
  }
  std::set<long> ids;
  for (std::size_t i = 0; i < lldb_.size(); ++i) {
    const auto& r = lldb_[i];
    if (!ids.insert(r.city_id).second) throw Error("duplicate City_Id " + std::to_string(r.city_id));
    if (!(r.latitude >= -90 && r.latitude <= 90) || !(r.longitude >= -180 && r.longitude <= 180))
      throw Error("coordinates out of range for " + r.city_name);
    city_index_[utf8::lookup_key(r.city_name)].push_back(i);
  }
  for (std::size_t i = 0; i < rldb_.size(); ++i) {
    if (rldb_[i].languages.empty()) throw Error("RLDB entry without languages: " + rldb_[i].place_or_state);
    if (!rldb_index_.emplace(utf8::lookup_key(rldb_[i].place_or_state), i).second)
      throw Error("duplicate RLDB key: " + rldb_[i].place_or_state);
  }
}

Gazetteer Gazetteer::load(const std::filesystem::path& csdb, const std::filesystem::path& lldb,
                          const std::filesystem::path& rldb) {
  return Gazetteer(load_csdb(csdb), load_lldb(lldb), load_rldb(rldb));
}

std::vector<const CsdbRecord*> Gazetteer::csdb_by_taluk(std::string_view taluk) const {
  std::vector<const CsdbRecord*> out;
  const auto it = taluk_index_.find(utf8::lookup_key(taluk));
  if (it != taluk_index_.end())
    for (auto i : it->second) out.push_back(&csdb_[i]);
  return out;
}

std::vector<const LldbRecord*> Gazetteer::lldb_by_city(std::string_view city) const {
  std::vector<const LldbRecord*> out;
  const auto it = city_index_.find(utf8::lookup_key(city));
  if (it != city_index_.end())
    for (auto i : it->second) out.push_back(&lldb_[i]);
  return out;
}

const RldbRecord* Gazetteer::rldb_entry(std::string_view key) const {
  const auto it = rldb_index_.find(utf8::lookup_key(key));
  return it == rldb_index_.end() ? nullptr : &rldb_[it->second];
}

lingua::PlaceIndex Gazetteer::place_index() const {
  lingua::PlaceIndex index;
  for (const auto& r : csdb_) {
    index.add(r.taluk);
    index.add(r.div_name);
  }
  return index;
}

namespace {

std::vector<csv::Row> read_table(const std::filesystem::path& path,
                                 const std::vector<std::string>& header) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw Error("empty table " + path.string());
  std::vector<std::string> got;
  for (const auto& h : rows.front()) got.push_back(csv::trim(h));
  if (got != header) throw Error("unexpected header in " + path.string());
  rows.erase(rows.begin());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != header.size())
      throw Error(path.string() + ": row " + std::to_string(i + 2) + " has " +
                  std::to_string(rows[i].size()) + " fields");
    for (auto& f : rows[i]) f = csv::trim(f);
  }
  return rows;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, double>)
      v = std::stod(s, &used);
    else
      v = static_cast<T>(std::stol(s, &used));
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw Error("invalid " + what + ": '" + s + "'");
  }
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<csv::Row>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << csv::join(header) << '\n';
  for (const auto& r : rows) out << csv::join(r) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<CsdbRecord> load_csdb(const std::filesystem::path& path) {
  std::vector<CsdbRecord> out;
  for (const auto& r : read_table(path, kCsdbHeader))
    out.push_back({r[0], parse_number<int>(r[1], "Pincode"), r[2], r[3], r[4], r[5], r[6]});
  return out;
}

std::vector<LldbRecord> load_lldb(const std::filesystem::path& path) {
  std::vector<LldbRecord> out;
  for (const auto& r : read_table(path, kLldbHeader))
    out.push_back({parse_number<long>(r[0], "City_Id"), r[1], parse_number<double>(r[2], "Latitude"),
                   parse_number<double>(r[3], "Longitude"), r[4]});
  return out;
}

std::vector<RldbRecord> load_rldb(const std::filesystem::path& path) {
  std::vector<RldbRecord> out;
  for (const auto& r : read_table(path, kRldbHeader)) {
    RldbRecord rec{r[0], {}};
    std::size_t start = 0;
    while (start <= r[1].size()) {
      const auto end = std::min(r[1].find(';', start), r[1].size());
      const std::string lang = csv::trim(std::string_view(r[1]).substr(start, end - start));
      if (!lang.empty()) rec.languages.push_back(lang);
      start = end + 1;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_csdb(const std::filesystem::path& path, const std::vector<CsdbRecord>& rows) {
  std::vector<csv::Row> table;
  for (const auto& r : rows)
    table.push_back({r.div_name, std::to_string(r.pincode), r.taluk, r.circle, r.region, r.district, r.state});
  write_table(path, kCsdbHeader, table);
}

void save_lldb(const std::filesystem::path& path, const std::vector<LldbRecord>& rows) {
  std::vector<csv::Row> table;
  for (const auto& r : rows)
    table.push_back({std::to_string(r.city_id), r.city_name, format_double(r.latitude),
                     format_double(r.longitude), r.state});
  write_table(path, kLldbHeader, table);
}

void save_rldb(const std::filesystem::path& path, const std::vector<RldbRecord>& rows) {
  std::vector<csv::Row> table;
  for (const auto& r : rows) {
    std::string langs;
    for (const auto& l : r.languages) langs += (langs.empty() ? "" : ";") + l;
    table.push_back({r.place_or_state, langs});
  }
  write_table(path, kRldbHeader, table);
}

std::vector<Candidate> keyword_candidates(std::string_view keyword, const Gazetteer& gaz) {
  std::vector<Candidate> out;
  for (const CsdbRecord* post : gaz.csdb_by_taluk(keyword)) {
    for (const LldbRecord* city : gaz.lldb_by_city(post->div_name)) {
      Candidate c{{city->latitude, city->longitude, post->pincode}, post->state, city->city_name};
      const bool dup = std::any_of(out.begin(), out.end(),
                                   [&](const Candidate& o) { return same_tuple(o.tuple, c.tuple); });
      if (!dup) out.push_back(std::move(c));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return tuple_less(a.tuple, b.tuple); });
  return out;
}

std::vector<GeoTuple> keyword_tuples(std::string_view keyword, const Gazetteer& gaz) {
  std::vector<GeoTuple> out;
  for (const auto& c : keyword_candidates(keyword, gaz)) out.push_back(c.tuple);
  return out;
}

std::vector<Candidate> common_candidates(const std::vector<std::vector<Candidate>>& sets) {
  std::vector<const std::vector<Candidate>*> nonempty;
  for (const auto& s : sets)
    if (!s.empty()) nonempty.push_back(&s);
  if (nonempty.empty()) throw Error("no candidates");
  std::vector<Candidate> out;
  for (const auto& c : *nonempty.front()) {
    const bool everywhere = std::all_of(nonempty.begin() + 1, nonempty.end(), [&](const auto* s) {
      return std::any_of(s->begin(), s->end(), [&](const Candidate& o) { return same_tuple(o.tuple, c.tuple); });
    });
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const Candidate& o) { return same_tuple(o.tuple, c.tuple); });
    if (everywhere && !dup) out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return tuple_less(a.tuple, b.tuple); });
  return out;
}

std::vector<GeoTuple> common_tuples(const std::vector<std::vector<GeoTuple>>& sets) {
  std::vector<std::vector<Candidate>> wrapped;
  for (const auto& s : sets) {
    auto& w = wrapped.emplace_back();
    for (const auto& t : s) w.push_back({t, {}, {}});
  }
  std::vector<GeoTuple> out;
  for (const auto& c : common_candidates(wrapped)) out.push_back(c.tuple);
  return out;
}

std::string to_string(ResolutionStage s) {
  switch (s) {
    case ResolutionStage::Direct: return "direct";
    case ResolutionStage::ScriptFilter: return "script_filter";
    case ResolutionStage::PairedTokens: return "paired_tokens";
    case ResolutionStage::Unresolved: return "unresolved";
  }
  return "?";
}

namespace {

bool single_state(const std::vector<Candidate>& cands) {
  if (cands.empty()) return false;
  const std::string first = utf8::lookup_key(cands.front().state);
  return std::all_of(cands.begin(), cands.end(),
                     [&](const Candidate& c) { return utf8::lookup_key(c.state) == first; });
}

bool speaks(const Gazetteer& gaz, const std::string& state, const std::string& language) {
  const RldbRecord* entry = gaz.rldb_entry(state);
  if (!entry) return false;
  const std::string want = utf8::lookup_key(language);
  return std::any_of(entry->languages.begin(), entry->languages.end(),
                     [&](const std::string& l) { return utf8::lookup_key(l) == want; });
}

std::vector<Candidate> filter_by_language(const std::vector<Candidate>& cands, const Gazetteer& gaz,
                                          const std::string& language) {
  std::vector<Candidate> out;
  for (const auto& c : cands)
    if (speaks(gaz, c.state, language)) out.push_back(c);
  return out;
}

std::vector<Candidate> intersect_nonempty(const std::vector<std::vector<Candidate>>& sets) {
  const bool any = std::any_of(sets.begin(), sets.end(), [](const auto& s) { return !s.empty(); });
  return any ? common_candidates(sets) : std::vector<Candidate>{};
}

Resolution resolved(ResolutionStage stage, std::vector<Candidate> cands) {
  Resolution r;
  r.stage = stage;
  r.chosen = cands.front();
  r.candidates = std::move(cands);
  return r;
}

}  // namespace

Resolution resolve_ambiguity(const std::vector<lingua::Token>& tokens,
                             const std::vector<std::vector<Candidate>>& keyword_sets,
                             std::optional<lingua::ScriptId> script, const Gazetteer& gaz) {
  std::optional<std::string> language;
  if (script) language = lingua::language_name(*script);

  if (language) {
    std::vector<std::vector<Candidate>> filtered;
    for (const auto& s : keyword_sets) filtered.push_back(filter_by_language(s, gaz, *language));
    auto common = intersect_nonempty(filtered);
    if (single_state(common)) return resolved(ResolutionStage::ScriptFilter, std::move(common));
  }

  std::vector<std::vector<Candidate>> pair_sets;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    pair_sets.push_back(keyword_candidates(tokens[i].text + " " + tokens[i + 1].text, gaz));
  auto common = intersect_nonempty(pair_sets);
  if (!single_state(common) && language) common = filter_by_language(common, gaz, *language);
  if (single_state(common)) return resolved(ResolutionStage::PairedTokens, std::move(common));

  return {};
}

Resolution resolve_location(const std::vector<lingua::Token>& tokens,
                            const std::vector<lingua::Token>& keywords,
                            std::optional<lingua::ScriptId> script, const Gazetteer& gaz) {
  std::vector<std::vector<Candidate>> sets;
  for (const auto& k : keywords) sets.push_back(keyword_candidates(k.text, gaz));
  auto common = intersect_nonempty(sets);
  if (single_state(common)) return resolved(ResolutionStage::Direct, std::move(common));
  return resolve_ambiguity(tokens, sets, script, gaz);
}

double haversine_km(const LatLon& a, const LatLon& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.latitude - a.latitude) * rad;
  const double dlon = (b.longitude - a.longitude) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.latitude * rad) * std::cos(b.latitude * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

const LldbRecord& reverse_geocode(double latitude, double longitude, const std::vector<LldbRecord>& lldb) {
  if (lldb.empty()) throw Error("empty city database");
  const LldbRecord* best = nullptr;
  double best_d = 0;
  for (const auto& r : lldb) {
    const double d = haversine_km({latitude, longitude}, {r.latitude, r.longitude});
    if (!best || d < best_d || (d == best_d && r.city_id < best->city_id)) {
      best = &r;
      best_d = d;
    }
  }
  return *best;
}

std::vector<std::string> languages_for(const LldbRecord& record, const Gazetteer& gaz) {
  if (const RldbRecord* city = gaz.rldb_entry(record.city_name)) return city->languages;
  if (const RldbRecord* state = gaz.rldb_entry(record.state)) return state->languages;
  throw Error("no language data");
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

GeotagRecord geotag(const std::string& image_id, const GeoTuple& tuple,
                    const std::vector<std::string>& languages, const std::string& place,
                    const Clock& clock) {
  return {image_id, tuple.latitude, tuple.longitude, tuple.pincode, place, languages, clock()};
}

std::string geotag_to_json(const GeotagRecord& r) {
  nlohmann::ordered_json j;
  j["image_id"] = r.image_id;
  j["latitude"] = r.latitude;
  j["longitude"] = r.longitude;
  j["pincode"] = r.pincode;
  j["place"] = r.place;
  j["languages"] = r.languages;
  j["resolved_at"] = r.resolved_at;
  return j.dump();
}

GeotagRecord geotag_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return {j.at("image_id").get<std::string>(), j.at("latitude").get<double>(),
            j.at("longitude").get<double>(), j.at("pincode").get<int>(),
            j.at("place").get<std::string>(), j.at("languages").get<std::vector<std::string>>(),
            j.at("resolved_at").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad geotag record: ") + e.what());
  }
}

void append_geotag(const std::filesystem::path& path, const GeotagRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write geotag file " + path.string());
  out << geotag_to_json(record) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<GeotagRecord> read_geotags(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<GeotagRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!csv::trim(line).empty()) out.push_back(geotag_from_json(line));
  return out;
}

double parse_coordinate(std::string_view text) {
  std::string s = csv::trim(text);
  double sign = 1;
  // Strip trailing quote marks and a hemisphere letter, in any order.
  while (!s.empty()) {
    const char c = s.back();
    if (c == '\'' || c == '"' || c == ' ') {
      s.pop_back();
    } else if (c == 'N' || c == 'n' || c == 'E' || c == 'e') {
      s.pop_back();
    } else if (c == 'S' || c == 's' || c == 'W' || c == 'w') {
      sign = -sign;
      s.pop_back();
    } else {
      break;
    }
  }
  return sign * parse_number<double>(csv::trim(s), "coordinate");
}

namespace {

std::size_t column(const csv::Row& header, std::initializer_list<std::string_view> names,
                   const std::filesystem::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = utf8::lookup_key(csv::trim(header[i]));
    for (auto n : names)
      if (h == utf8::lookup_key(n)) return i;
  }
  throw Error(path.string() + ": missing column " + std::string(*names.begin()));
}

}  // namespace

std::vector<CsdbRecord> import_pincode_directory(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw Error("empty source " + path.string());
  const auto& h = rows.front();
  const auto c_div = column(h, {"divisionname", "Div_Name", "Division_Name"}, path);
  const auto c_pin = column(h, {"pincode"}, path);
  const auto c_taluk = column(h, {"Taluk"}, path);
  const auto c_circle = column(h, {"circlename", "Circle"}, path);
  const auto c_region = column(h, {"regionname", "Region"}, path);
  const auto c_district = column(h, {"Districtname", "District"}, path);
  const auto c_state = column(h, {"statename", "State"}, path);

  std::vector<CsdbRecord> out;
  std::set<std::tuple<std::string, int, std::string>> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() < h.size()) continue;
    CsdbRecord rec{csv::trim(r[c_div]), 0, csv::trim(r[c_taluk]), csv::trim(r[c_circle]),
                   csv::trim(r[c_region]), csv::trim(r[c_district]), csv::trim(r[c_state])};
    rec.pincode = parse_number<int>(csv::trim(r[c_pin]), "pincode");
    // Rows without a usable taluk carry no locality key.
    if (rec.taluk.empty() || utf8::lookup_key(rec.taluk) == "na") continue;
    if (seen.emplace(utf8::lookup_key(rec.div_name), rec.pincode, utf8::lookup_key(rec.taluk)).second)
      out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LldbRecord> import_city_coordinates(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const char sep = text.substr(0, text.find('\n')).find('\t') != std::string_view::npos ? '\t' : ',';
  const auto rows = csv::parse(text, sep);
  if (rows.empty()) throw Error("empty source " + path.string());
  const auto& h = rows.front();
  const auto c_id = column(h, {"City Id", "City_Id", "id"}, path);
  const auto c_name = column(h, {"City_Name", "City", "name"}, path);
  const auto c_lat = column(h, {"Latitude", "lat"}, path);
  const auto c_lon = column(h, {"Longitude", "lon", "lng"}, path);
  const auto c_state = column(h, {"State"}, path);
  std::vector<LldbRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() < h.size()) continue;
    out.push_back({parse_number<long>(csv::trim(r[c_id]), "City Id"), csv::trim(r[c_name]),
                   parse_coordinate(r[c_lat]), parse_coordinate(r[c_lon]), csv::trim(r[c_state])});
  }
  return out;
}

std::vector<RldbRecord> import_language_table(const std::filesystem::path& path) {
  std::vector<RldbRecord> out;
  for (const auto& r : csv::read_file(path, '\t')) {
    if (r.size() < 2 || csv::trim(r[0]).empty() || r[0].starts_with("#")) continue;
    RldbRecord rec{csv::trim(r[0]), {}};
    std::size_t start = 0;
    const std::string& langs = r[1];
    while (start <= langs.size()) {
      const auto end = std::min(langs.find_first_of(",;", start), langs.size());
      const std::string l = csv::trim(std::string_view(langs).substr(start, end - start));
      if (!l.empty()) rec.languages.push_back(l);
      start = end + 1;
    }
    if (!rec.languages.empty()) out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace s2l::georesolve
