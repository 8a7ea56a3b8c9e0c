#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "s2l/lingua.hpp"

namespace s2l::georesolve {

/// Post-office directory row.
struct CsdbRecord {
  std::string div_name;
  int pincode = 0;
  std::string taluk;
  std::string circle;
  std::string region;
  std::string district;
  std::string state;
};

/// City coordinate row.
struct LldbRecord {
  long city_id = 0;
  std::string city_name;
  double latitude = 0;
  double longitude = 0;
  std::string state;

  friend bool operator==(const LldbRecord&, const LldbRecord&) = default;
};

/// Regional languages of a place or state.
struct RldbRecord {
  std::string place_or_state;
  std::vector<std::string> languages;
};

struct GeoTuple {
  double latitude = 0;
  double longitude = 0;
  int pincode = 0;
};

inline constexpr double kCoordTolerance = 1e-6;

/// Pincode equal and both coordinates within kCoordTolerance degrees.
bool same_tuple(const GeoTuple& a, const GeoTuple& b);
/// Orders by pincode, then latitude, then longitude.
bool tuple_less(const GeoTuple& a, const GeoTuple& b);

inline const std::vector<std::string> kCsdbHeader{"Div_Name", "Pincode", "Taluk", "Circle",
                                                  "Region", "District", "State"};
inline const std::vector<std::string> kLldbHeader{"City_Id", "City_Name", "Latitude", "Longitude",
                                                  "State"};
inline const std::vector<std::string> kRldbHeader{"place_or_state", "languages"};

/// The three read-only databases with case-folded lookup indexes.
class Gazetteer {
 public:
  Gazetteer() = default;
  Gazetteer(std::vector<CsdbRecord> csdb, std::vector<LldbRecord> lldb, std::vector<RldbRecord> rldb);

  static Gazetteer load(const std::filesystem::path& csdb, const std::filesystem::path& lldb,
                        const std::filesystem::path& rldb);

  const std::vector<CsdbRecord>& csdb() const { return csdb_; }
  const std::vector<LldbRecord>& lldb() const { return lldb_; }
  const std::vector<RldbRecord>& rldb() const { return rldb_; }

  std::vector<const CsdbRecord*> csdb_by_taluk(std::string_view taluk) const;
  std::vector<const LldbRecord*> lldb_by_city(std::string_view city) const;
  const RldbRecord* rldb_entry(std::string_view key) const;

  /// Taluk and division names, the vocabulary for keyword filtering.
  lingua::PlaceIndex place_index() const;

 private:
  std::vector<CsdbRecord> csdb_;
  std::vector<LldbRecord> lldb_;
  std::vector<RldbRecord> rldb_;
  std::unordered_map<std::string, std::vector<std::size_t>> taluk_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> city_index_;
  std::unordered_map<std::string, std::size_t> rldb_index_;
};

std::vector<CsdbRecord> load_csdb(const std::filesystem::path& path);
std::vector<LldbRecord> load_lldb(const std::filesystem::path& path);
std::vector<RldbRecord> load_rldb(const std::filesystem::path& path);
void save_csdb(const std::filesystem::path& path, const std::vector<CsdbRecord>& rows);
void save_lldb(const std::filesystem::path& path, const std::vector<LldbRecord>& rows);
void save_rldb(const std::filesystem::path& path, const std::vector<RldbRecord>& rows);

/// A tuple together with where it came from.
struct Candidate {
  GeoTuple tuple;
  std::string state;  // state of the post-office row
  std::string place;  // joined city name
};

/// Join of post-office rows whose taluk is `keyword` with cities named after
/// the row's division. Duplicate tuples are collapsed; sorted by tuple_less.
std::vector<Candidate> keyword_candidates(std::string_view keyword, const Gazetteer& gaz);
std::vector<GeoTuple> keyword_tuples(std::string_view keyword, const Gazetteer& gaz);

/// Intersection of the non-empty sets. Throws "no candidates" when every
/// set is empty or none is given.
std::vector<GeoTuple> common_tuples(const std::vector<std::vector<GeoTuple>>& sets);
std::vector<Candidate> common_candidates(const std::vector<std::vector<Candidate>>& sets);

/// Which step settled the location.
enum class ResolutionStage { Direct, ScriptFilter, PairedTokens, Unresolved };
std::string to_string(ResolutionStage s);

struct Resolution {
  ResolutionStage stage = ResolutionStage::Unresolved;
  std::vector<Candidate> candidates;  // empty when unresolved
  std::optional<Candidate> chosen;    // lowest tuple among candidates
};

/// Common tuples of the keywords. A non-empty result confined to one state
/// is resolved directly. Otherwise: keep candidates whose state speaks the
/// detected script's language; then retry with adjacent token pairs
/// "tok_i tok_i+1"; otherwise unresolved.
Resolution resolve_location(const std::vector<lingua::Token>& tokens,
                            const std::vector<lingua::Token>& keywords,
                            std::optional<lingua::ScriptId> script, const Gazetteer& gaz);

/// Only the ambiguity stages (script filter, then token pairs), given the
/// per-keyword candidate sets.
Resolution resolve_ambiguity(const std::vector<lingua::Token>& tokens,
                             const std::vector<std::vector<Candidate>>& keyword_sets,
                             std::optional<lingua::ScriptId> script, const Gazetteer& gaz);

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double latitude = 0;
  double longitude = 0;
};

double haversine_km(const LatLon& a, const LatLon& b);

/// Nearest city by great-circle distance; ties go to the smaller city id.
const LldbRecord& reverse_geocode(double latitude, double longitude, const std::vector<LldbRecord>& lldb);

/// Languages by city name, falling back to the state. Throws "no language
/// data" when neither is present.
std::vector<std::string> languages_for(const LldbRecord& record, const Gazetteer& gaz);

struct GeotagRecord {
  std::string image_id;
  double latitude = 0;
  double longitude = 0;
  int pincode = 0;
  std::string place;
  std::vector<std::string> languages;
  std::string resolved_at;  // ISO 8601 UTC

  friend bool operator==(const GeotagRecord&, const GeotagRecord&) = default;
};

using Clock = std::function<std::string()>;
/// Current UTC time formatted as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_now();

GeotagRecord geotag(const std::string& image_id, const GeoTuple& tuple,
                    const std::vector<std::string>& languages, const std::string& place,
                    const Clock& clock = utc_now);

std::string geotag_to_json(const GeotagRecord& record);
GeotagRecord geotag_from_json(std::string_view line);

/// Appends one JSON line to the sidecar file.
void append_geotag(const std::filesystem::path& path, const GeotagRecord& record);
std::vector<GeotagRecord> read_geotags(const std::filesystem::path& path);

// Importers turning the public source layouts into the database CSVs.

/// All-India pincode directory CSV (columns include divisionname, pincode,
/// Taluk, circlename, regionname, Districtname, statename).
std::vector<CsdbRecord> import_pincode_directory(const std::filesystem::path& path);
/// City list with "City Id, City_Name, Latitude, Longitude, State" columns,
/// comma or tab separated, coordinates optionally suffixed N'/S'/E'/W'.
std::vector<LldbRecord> import_city_coordinates(const std::filesystem::path& path);
/// Tab-separated `place<TAB>lang1, lang2, ...`.
std::vector<RldbRecord> import_language_table(const std::filesystem::path& path);

/// Parses "25.88 N'", "86.59 E'", "92.76'" or plain decimals.
double parse_coordinate(std::string_view text);

}  // namespace s2l::georesolve
