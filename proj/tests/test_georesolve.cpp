#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "s2l/error.hpp"
#include "s2l/georesolve.hpp"
#include "support.hpp"

using namespace s2l;
using namespace s2l::georesolve;
using lingua::ScriptId;

namespace {

Gazetteer tables() {
  const auto d = s2l::testing::data_dir() / "fixtures" / "tables";
  return Gazetteer::load(d / "csdb.csv", d / "lldb.csv", d / "rldb.csv");
}

Gazetteer raniganj() {
  const auto d = s2l::testing::data_dir() / "fixtures" / "raniganj";
  return Gazetteer::load(d / "csdb.csv", d / "lldb.csv", d / "rldb.csv");
}

Resolution resolve_text(const std::string& text, std::optional<ScriptId> script, const Gazetteer& gaz) {
  const auto tokens = lingua::tokenize(text);
  return resolve_location(tokens, lingua::filter_location_tokens(tokens, gaz.place_index()), script, gaz);
}

// Independent haversine in the same units.
double oracle_km(double lat1, double lon1, double lat2, double lon2) {
  const double r = std::acos(-1.0) / 180;
  const double a = std::pow(std::sin((lat2 - lat1) * r / 2), 2) +
                   std::cos(lat1 * r) * std::cos(lat2 * r) * std::pow(std::sin((lon2 - lon1) * r / 2), 2);
  return 2 * 6371.0 * std::atan2(std::sqrt(a), std::sqrt(1 - a));
}

// Set intersection by brute force over exact pincode and coordinate equality.
std::vector<GeoTuple> intersect_oracle(const std::vector<std::vector<GeoTuple>>& sets) {
  std::vector<GeoTuple> out;
  std::vector<const std::vector<GeoTuple>*> live;
  for (const auto& s : sets)
    if (!s.empty()) live.push_back(&s);
  if (live.empty()) return out;
  for (const auto& t : *live[0]) {
    bool all = true;
    for (const auto* s : live)
      all = all && std::any_of(s->begin(), s->end(), [&](const GeoTuple& o) {
              return o.pincode == t.pincode && o.latitude == t.latitude && o.longitude == t.longitude;
            });
    const bool dup = std::any_of(out.begin(), out.end(), [&](const GeoTuple& o) {
      return o.pincode == t.pincode && o.latitude == t.latitude && o.longitude == t.longitude;
    });
    if (all && !dup) out.push_back(t);
  }
  std::sort(out.begin(), out.end(), tuple_less);
  return out;
}

}  // namespace

TEST(Candidates, KaharaWorkedExample) {
  const auto gaz = tables();
  const auto t = keyword_tuples("Kahara", gaz);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_DOUBLE_EQ(t[0].latitude, 25.88);
  EXPECT_DOUBLE_EQ(t[0].longitude, 86.59);
  EXPECT_EQ(t[0].pincode, 852201);
  EXPECT_EQ(keyword_tuples("  KAHARA ", gaz).size(), 1u);
}

TEST(Candidates, NoJoinPartner) {
  const auto gaz = tables();
  // The Port Blair post office belongs to division "A-N Islands", which has
  // no city row of that name.
  EXPECT_TRUE(keyword_tuples("Port Blair", gaz).empty());
  EXPECT_TRUE(keyword_tuples("Xyzzy", gaz).empty());
}

TEST(Candidates, DuplicateRowsCollapse) {
  Gazetteer gaz({{"Saharsa", 852201, "Kahara", "", "", "", "Bihar"}, {"Saharsa", 852201, "kahara", "", "", "", "Bihar"}},
                {{255, "Saharsa", 25.88, 86.59, "Bihar"}}, {});
  EXPECT_EQ(keyword_tuples("Kahara", gaz).size(), 1u);
}

TEST(CommonTuples, ExamplesAndEmptySets) {
  const GeoTuple a{1, 2, 100}, b{3, 4, 200}, c{5, 6, 300};
  EXPECT_EQ(common_tuples({{a, b}, {b, c}}).size(), 1u);
  EXPECT_EQ(common_tuples({{a, b}, {b, c}})[0].pincode, 200);
  EXPECT_EQ(common_tuples({{a, b}, {}, {b}}).size(), 1u);
  EXPECT_EQ(common_tuples({{a, b}, {b, c}, {a, c}}).size(), 0u);
  EXPECT_THROW(common_tuples({{}, {}}), Error);
  EXPECT_THROW(common_tuples({}), Error);
}

TEST(CommonTuples, ToleranceAndOrder) {
  const GeoTuple a{1, 2, 100}, near{1 + 5e-7, 2, 100}, far{1 + 5e-6, 2, 100};
  EXPECT_EQ(common_tuples({{a}, {near}}).size(), 1u);
  EXPECT_TRUE(common_tuples({{a}, {far}}).empty());
  const auto out = common_tuples({{GeoTuple{0, 0, 3}, GeoTuple{0, 0, 1}, GeoTuple{1, 0, 1}}});
  EXPECT_EQ(out[0].pincode, 1);
  EXPECT_EQ(out[0].latitude, 0);
  EXPECT_EQ(out[2].pincode, 3);
}

TEST(CommonTuples, MatchesBruteForce) {
  std::mt19937 rng(12);
  std::vector<GeoTuple> pool;
  for (int i = 0; i < 6; ++i) pool.push_back({double(i % 3), double(i), 100 + i % 4});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<GeoTuple>> sets(std::uniform_int_distribution<int>(1, 4)(rng));
    for (auto& s : sets)
      for (const auto& t : pool)
        if (rng() % 2) s.push_back(t);
    const auto expect = intersect_oracle(sets);
    const bool all_empty = std::all_of(sets.begin(), sets.end(), [](const auto& s) { return s.empty(); });
    if (all_empty) {
      EXPECT_THROW(common_tuples(sets), Error);
      continue;
    }
    const auto got = common_tuples(sets);
    ASSERT_EQ(got.size(), expect.size()) << trial;
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_TRUE(same_tuple(got[i], expect[i]));
    auto rev = sets;
    std::reverse(rev.begin(), rev.end());
    EXPECT_EQ(common_tuples(rev).size(), got.size());
  }
}

TEST(Resolve, DirectForKahara) {
  const auto r = resolve_text("Kahara Bazar", ScriptId::Latin, tables());
  EXPECT_EQ(r.stage, ResolutionStage::Direct);
  ASSERT_TRUE(r.chosen);
  EXPECT_EQ(r.chosen->tuple.pincode, 852201);
  EXPECT_EQ(r.chosen->place, "Saharsa");
}

TEST(Resolve, ScriptFilterPicksHindiState) {
  const auto gaz = raniganj();
  EXPECT_EQ(keyword_tuples("Raniganj", gaz).size(), 2u);
  const auto r = resolve_text("Raniganj", ScriptId::Devanagari, gaz);
  EXPECT_EQ(r.stage, ResolutionStage::ScriptFilter);
  ASSERT_TRUE(r.chosen);
  EXPECT_EQ(r.chosen->tuple.pincode, 230304);
  EXPECT_EQ(r.chosen->state, "Uttar Pradesh");
}

TEST(Resolve, PairedTokensDisambiguate) {
  const auto r = resolve_text("Raniganj Bazar", ScriptId::Latin, raniganj());
  EXPECT_EQ(r.stage, ResolutionStage::PairedTokens);
  ASSERT_TRUE(r.chosen);
  EXPECT_EQ(r.chosen->tuple.pincode, 273001);
  EXPECT_EQ(r.chosen->place, "Gorakhpur");
}

TEST(Resolve, UnresolvableStaysUnresolved) {
  const auto r = resolve_text("Raniganj Road", ScriptId::Latin, raniganj());
  EXPECT_EQ(r.stage, ResolutionStage::Unresolved);
  EXPECT_FALSE(r.chosen);
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_EQ(resolve_text("Raniganj Road", std::nullopt, raniganj()).stage, ResolutionStage::Unresolved);
}

TEST(Haversine, WorkedDistance) {
  // Port Blair to Saharsa, evaluated independently: 1707.52 km.
  EXPECT_NEAR(haversine_km({11.67, 92.76}, {25.88, 86.59}), 1707.5209, 1.0);
  EXPECT_NEAR(haversine_km({11.67, 92.76}, {25.88, 86.59}), oracle_km(11.67, 92.76, 25.88, 86.59), 1e-9);
}

TEST(Haversine, Properties) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> lat(-89, 89), lon(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    EXPECT_EQ(haversine_km(a, a), 0.0);
    EXPECT_NEAR(haversine_km(a, b), haversine_km(b, a), 1e-9);
    EXPECT_LE(haversine_km(a, c), haversine_km(a, b) + haversine_km(b, c) + 1e-9);
    EXPECT_LE(haversine_km(a, b), std::acos(-1.0) * kEarthRadiusKm + 1e-9);
    EXPECT_NEAR(haversine_km(a, b), oracle_km(a.latitude, a.longitude, b.latitude, b.longitude), 1e-6);
  }
}

TEST(ReverseGeocode, WorkedQuery) {
  const auto gaz = tables();
  // 698.8 km to Saharsa against 1009.6 km to Port Blair.
  EXPECT_EQ(reverse_geocode(20, 89, gaz.lldb()).city_name, "Saharsa");
  EXPECT_NEAR(oracle_km(20, 89, 25.88, 86.59), 698.79, 0.01);
  EXPECT_NEAR(oracle_km(20, 89, 11.67, 92.76), 1009.64, 0.01);
}

TEST(ReverseGeocode, MatchesLinearScan) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> lat(5, 35), lon(68, 97);
  std::vector<LldbRecord> cities;
  for (int i = 0; i < 40; ++i) cities.push_back({1000 - i, "c" + std::to_string(i), lat(rng), lon(rng), "S"});
  for (const auto& c : cities) EXPECT_EQ(reverse_geocode(c.latitude, c.longitude, cities), c);
  for (int q = 0; q < 50; ++q) {
    const double a = lat(rng), b = lon(rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < cities.size(); ++i)
      if (oracle_km(a, b, cities[i].latitude, cities[i].longitude) <
          oracle_km(a, b, cities[best].latitude, cities[best].longitude))
        best = i;
    EXPECT_EQ(reverse_geocode(a, b, cities), cities[best]);
  }
  EXPECT_THROW(reverse_geocode(0, 0, {}), Error);
}

TEST(ReverseGeocode, TieGoesToSmallerId) {
  const std::vector<LldbRecord> twins{{9, "b", 10, 10, "S"}, {3, "a", 10, 10, "S"}};
  EXPECT_EQ(reverse_geocode(11, 11, twins).city_id, 3);
}

TEST(Languages, StateAndCityLookup) {
  const auto gaz = tables();
  EXPECT_EQ(languages_for(gaz.lldb()[1], gaz), (std::vector<std::string>{"Hindi", "Maithili"}));
  Gazetteer with_city(gaz.csdb(), gaz.lldb(), {{"Saharsa", {"Maithili"}}, {"Bihar", {"Hindi"}}});
  EXPECT_EQ(languages_for(gaz.lldb()[1], with_city), (std::vector<std::string>{"Maithili"}));
  Gazetteer none(gaz.csdb(), gaz.lldb(), {});
  EXPECT_THROW(languages_for(gaz.lldb()[1], none), Error);
}

TEST(Geotag, JsonRoundTripAndAppend) {
  const auto gaz = tables();
  const auto rec = geotag("kahara.png", keyword_tuples("Kahara", gaz)[0], {"Hindi", "Maithili"}, "Saharsa",
                          [] { return std::string("2026-01-02T03:04:05Z"); });
  EXPECT_EQ(rec.pincode, 852201);
  const auto json = geotag_to_json(rec);
  EXPECT_EQ(json.find("{\"image_id\":\"kahara.png\",\"latitude\":25.88"), 0u);
  EXPECT_EQ(geotag_from_json(json), rec);
  EXPECT_THROW(geotag_from_json("{\"image_id\":1}"), Error);

  const auto dir = s2l::testing::scratch_dir("geotag");
  append_geotag(dir / "tags.jsonl", rec);
  auto second = rec;
  second.image_id = "b.png";
  append_geotag(dir / "tags.jsonl", second);
  EXPECT_EQ(read_geotags(dir / "tags.jsonl"), (std::vector<GeotagRecord>{rec, second}));
  std::filesystem::remove_all(dir);
}

TEST(Geotag, UtcNowFormat) {
  const auto s = utc_now();
  ASSERT_EQ(s.size(), 20u);
  EXPECT_EQ(s[4], '-');
  EXPECT_EQ(s[10], 'T');
  EXPECT_EQ(s.back(), 'Z');
}

TEST(Tables, CsvRoundTrip) {
  const auto gaz = tables();
  const auto dir = s2l::testing::scratch_dir("tables");
  save_csdb(dir / "c.csv", gaz.csdb());
  save_lldb(dir / "l.csv", gaz.lldb());
  save_rldb(dir / "r.csv", gaz.rldb());
  const auto c = load_csdb(dir / "c.csv");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].div_name, "A-N Islands");
  EXPECT_EQ(c[1].pincode, 852201);
  EXPECT_EQ(load_lldb(dir / "l.csv"), gaz.lldb());
  const auto r = load_rldb(dir / "r.csv");
  EXPECT_EQ(r[1].languages.size(), 5u);
  std::filesystem::remove_all(dir);
}

TEST(Tables, BadRowsRejected) {
  const auto dir = s2l::testing::scratch_dir("badtables");
  {
    std::ofstream(dir / "c.csv") << "Div_Name,Pincode,Taluk,Circle,Region,District,State\nX,notanumber,T,C,R,D,S\n";
  }
  EXPECT_THROW(load_csdb(dir / "c.csv"), Error);
  EXPECT_THROW(load_lldb(dir / "missing.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Import, PublicLayouts) {
  const auto dir = s2l::testing::scratch_dir("import");
  {
    std::ofstream out(dir / "pin.csv");
    out << "officename,pincode,officeType,Deliverystatus,divisionname,regionname,circlename,Taluk,Districtname,statename\n"
        << "Kahara B.O,852201,B.O,Delivery,Saharsa,Bhagalpur,Bihar,Kahara,Saharsa,BIHAR\n"
        << "Kahara S.O,852201,S.O,Delivery,Saharsa,Bhagalpur,Bihar,Kahara,Saharsa,BIHAR\n"
        << "Nowhere,100000,B.O,Delivery,X,Y,Z,NA,D,S\n";
  }
  const auto csdb = import_pincode_directory(dir / "pin.csv");
  ASSERT_EQ(csdb.size(), 1u);
  EXPECT_EQ(csdb[0].div_name, "Saharsa");
  EXPECT_EQ(csdb[0].taluk, "Kahara");
  EXPECT_EQ(csdb[0].circle, "Bihar");

  {
    std::ofstream out(dir / "cities.tsv");
    out << "City Id\tCity_Name\tLatitude\tLongitude\tState\n255\tSaharsa\t25.88 N'\t86.59 E'\tBihar\n";
  }
  const auto lldb = import_city_coordinates(dir / "cities.tsv");
  ASSERT_EQ(lldb.size(), 1u);
  EXPECT_EQ(lldb[0], (LldbRecord{255, "Saharsa", 25.88, 86.59, "Bihar"}));

  {
    std::ofstream out(dir / "langs.tsv");
    out << "Bihar\tHindi, Maithili\n# comment\tx\n";
  }
  const auto rldb = import_language_table(dir / "langs.tsv");
  ASSERT_EQ(rldb.size(), 1u);
  EXPECT_EQ(rldb[0].languages, (std::vector<std::string>{"Hindi", "Maithili"}));
  std::filesystem::remove_all(dir);
}

TEST(Import, ParseCoordinate) {
  EXPECT_DOUBLE_EQ(parse_coordinate("25.88 N'"), 25.88);
  EXPECT_DOUBLE_EQ(parse_coordinate("92.76'"), 92.76);
  EXPECT_DOUBLE_EQ(parse_coordinate(" 12.5 S"), -12.5);
  EXPECT_DOUBLE_EQ(parse_coordinate("70W"), -70);
  EXPECT_THROW(parse_coordinate("north"), Error);
}
