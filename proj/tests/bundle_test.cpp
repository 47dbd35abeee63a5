#include <gtest/gtest.h>
#include <zlib.h>

#include "aclear/bundle.hpp"
#include "aclear/zip.hpp"
#include "golden.hpp"
#include "support.hpp"

using namespace aclear;
using testsupport::fixture_bundle;
using testsupport::TempDir;
using testsupport::throws_code;

namespace {

std::map<std::string, std::string> members(std::string_view bytes) {
  std::map<std::string, std::string> out;
  for (auto& e : parse_zip(bytes)) out[e.name] = e.data;
  return out;
}

std::string rebuild(const std::map<std::string, std::string>& m, const std::vector<std::string>& order) {
  std::vector<ZipEntry> entries;
  for (const auto& name : order) entries.push_back({name, m.at(name)});
  return build_zip(entries);
}

std::vector<std::string> names_of(std::string_view bytes) {
  std::vector<std::string> out;
  for (auto& e : parse_zip(bytes)) out.push_back(e.name);
  return out;
}

void le(std::string& s, std::uint32_t v, int n) {
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

/// Archive with raw-deflate members, as typical zip tools write them.
std::string deflated_zip(const std::vector<ZipEntry>& entries) {
  std::string out, central;
  for (const auto& e : entries) {
    z_stream zs{};
    deflateInit2(&zs, 6, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY);
    std::string packed(deflateBound(&zs, e.data.size()), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(e.data.data()));
    zs.avail_in = static_cast<uInt>(e.data.size());
    zs.next_out = reinterpret_cast<Bytef*>(packed.data());
    zs.avail_out = static_cast<uInt>(packed.size());
    deflate(&zs, Z_FINISH);
    packed.resize(zs.total_out);
    deflateEnd(&zs);
    auto crc = static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(e.data.data()),
                                                static_cast<uInt>(e.data.size())));
    std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    le(out, 0x04034b50, 4); le(out, 20, 2); le(out, 0, 2); le(out, 8, 2); le(out, 0, 4);
    le(out, crc, 4); le(out, packed.size(), 4); le(out, e.data.size(), 4);
    le(out, e.name.size(), 2); le(out, 0, 2);
    out += e.name + packed;
    le(central, 0x02014b50, 4); le(central, 20, 2); le(central, 20, 2); le(central, 0, 2); le(central, 8, 2);
    le(central, 0, 4); le(central, crc, 4); le(central, packed.size(), 4); le(central, e.data.size(), 4);
    le(central, e.name.size(), 2); le(central, 0, 2); le(central, 0, 2); le(central, 0, 2); le(central, 0, 2);
    le(central, 0, 4); le(central, offset, 4);
    central += e.name;
  }
  std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  le(out, 0x06054b50, 4); le(out, 0, 2); le(out, 0, 2); le(out, entries.size(), 2); le(out, entries.size(), 2);
  le(out, central.size(), 4); le(out, cd_offset, 4); le(out, 0, 2);
  return out;
}

}  // namespace

TEST(Zip, StoredRoundTripAndDeterminism) {
  std::vector<ZipEntry> e{{"a.json", "{}\n"}, {"dir/b.txt", std::string(100000, 'x')}, {"empty", ""}};
  auto bytes = build_zip(e);
  EXPECT_EQ(bytes, build_zip(e));
  auto back = parse_zip(bytes);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].name, e[i].name);
    EXPECT_EQ(back[i].data, e[i].data);
  }
}

TEST(Zip, ReadsDeflatedMembers) {
  std::vector<ZipEntry> e{{"x.json", std::string(5000, 'q') + "tail"}, {"y", "short"}};
  auto back = parse_zip(deflated_zip(e));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].data, e[0].data);
  EXPECT_EQ(back[1].data, "short");
}

TEST(Zip, DetectsDamage) {
  auto bytes = build_zip({{"a", "hello world"}});
  EXPECT_TRUE(throws_code([&] { parse_zip(bytes.substr(0, bytes.size() / 2)); }, ErrorCode::CorruptBundle));
  auto flipped = bytes;
  flipped[flipped.find("hello")] = 'j';
  EXPECT_TRUE(throws_code([&] { parse_zip(flipped); }, ErrorCode::CorruptBundle));
  EXPECT_TRUE(throws_code([] { parse_zip("not a zip at all"); }, ErrorCode::CorruptBundle));
}

TEST(MemberNames, EscapeUnsafeCharacters) {
  EXPECT_EQ(member_name_component("trace-01_a.b"), "trace-01_a.b");
  EXPECT_EQ(member_name_component("a/b c"), "a%2Fb%20c");
  EXPECT_EQ(member_name_component(".."), "%2E.");
  EXPECT_EQ(member_name_component("ü"), "%C3%BC");
}

TEST(Bundle, MemberLayout) {
  auto names = names_of(bundle_bytes(fixture_bundle()));
  ASSERT_FALSE(names.empty());
  EXPECT_EQ(names.front(), "manifest.json");
  std::vector<std::string> expected{"manifest.json"};
  for (int i = 1; i <= 10; ++i) expected.push_back("corpus/t" + std::string(i < 10 ? "0" : "") + std::to_string(i) + ".json");
  for (int i = 1; i <= 10; ++i)
    expected.push_back("evaluations/t" + std::string(i < 10 ? "0" : "") + std::to_string(i) + ".json");
  expected.push_back("insights/system.json");
  for (std::string n : {"executor", "planner", "reporter"}) expected.push_back("insights/nodes/" + n + ".json");
  expected.push_back("analytics/topology.json");
  expected.push_back("analytics/node_stats.json");
  expected.push_back("analytics/reliability.json");
  EXPECT_EQ(names, expected);
}

TEST(Bundle, ManifestContents) {
  const auto& b = fixture_bundle();
  auto m = members(bundle_bytes(b));
  Json manifest = Json::parse(m.at("manifest.json"));
  EXPECT_EQ(manifest.at("format_version"), 1);
  EXPECT_EQ(manifest.at("created_at"), "1970-01-01T00:00:00.000Z");
  EXPECT_EQ(manifest.at("corpus").at("trace_count"), 10);
  EXPECT_EQ(manifest.at("corpus").at("step_count"), 39);
  EXPECT_EQ(manifest.at("config").at("judge").at("backend"), "mock");
  EXPECT_TRUE(manifest.at("failures").empty());
  EXPECT_EQ(m.at("manifest.json").back(), '\n');
}

TEST(Bundle, RoundTripIsLossless) {
  const auto& b = fixture_bundle();
  auto bytes = bundle_bytes(b);
  auto back = parse_bundle(bytes);
  EXPECT_TRUE(back == b);
  EXPECT_EQ(bundle_bytes(back), bytes);
}

TEST(Bundle, WriteReadWriteIsByteIdentical) {
  TempDir dir;
  auto p1 = dir.path() / "one.zip", p2 = dir.path() / "two.zip";
  write_bundle(fixture_bundle(), p1);
  write_bundle(read_bundle(p1), p2);
  EXPECT_EQ(read_file_bytes(p1), read_file_bytes(p2));
}

TEST(Bundle, DeflatedCopyReadsTheSame) {
  auto bytes = bundle_bytes(fixture_bundle());
  auto recompressed = deflated_zip(parse_zip(bytes));
  EXPECT_NE(recompressed, bytes);
  EXPECT_TRUE(parse_bundle(recompressed) == fixture_bundle());
}

TEST(Bundle, EmptyInsightSetsAreValid) {
  auto b = fixture_bundle();
  for (auto& [node, set] : b.node_insights) {
    set.insights.clear();
    set.assigned_items = 0;
    set.coverage = 0;
  }
  for (auto& [node, s] : b.node_stats) s.issue_counts.clear();
  b.system_insights.reset();
  auto back = parse_bundle(bundle_bytes(b));
  EXPECT_TRUE(back == b);
  EXPECT_FALSE(back.system_insights);
}

TEST(Bundle, MissingManifestIsCorrupt) {
  auto m = members(bundle_bytes(fixture_bundle()));
  std::vector<std::string> order;
  for (const auto& [k, v] : m)
    if (k != "manifest.json") order.push_back(k);
  EXPECT_TRUE(throws_code([&] { parse_bundle(rebuild(m, order)); }, ErrorCode::CorruptBundle));
}

TEST(Bundle, NewerFormatIsRefused) {
  auto bytes = bundle_bytes(fixture_bundle());
  auto m = members(bytes);
  Json manifest = Json::parse(m.at("manifest.json"));
  manifest["format_version"] = 2;
  m["manifest.json"] = manifest.dump(2) + "\n";
  try {
    parse_bundle(rebuild(m, names_of(bytes)));
    FAIL() << "accepted format_version 2";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionMismatch);
    std::string msg = e.what();
    EXPECT_NE(msg.find("format_version 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("format_version 1"), std::string::npos) << msg;
  }
  manifest["format_version"] = "one";
  m["manifest.json"] = manifest.dump(2) + "\n";
  EXPECT_TRUE(throws_code([&] { parse_bundle(rebuild(m, names_of(bytes))); }, ErrorCode::CorruptBundle));
}

TEST(Bundle, BadJsonMemberIsCorrupt) {
  auto bytes = bundle_bytes(fixture_bundle());
  auto m = members(bytes);
  m["analytics/topology.json"] = "{\"nodes\": [";
  EXPECT_TRUE(throws_code([&] { parse_bundle(rebuild(m, names_of(bytes))); }, ErrorCode::CorruptBundle));
}

TEST(Bundle, DanglingReferencesAreRejected) {
  {
    auto b = fixture_bundle();
    b.system_insights->insights[0].instance_refs[0].trace_id = "ghost";
    EXPECT_TRUE(throws_code([&] { check_references(b); }, ErrorCode::ReferenceError));
    // The writer checks too, so a broken bundle is never produced.
    EXPECT_TRUE(throws_code([&] { bundle_bytes(b); }, ErrorCode::ReferenceError));
  }
  {
    auto b = fixture_bundle();
    b.node_insights.at("executor").insights[0].instance_refs[0].step_index = 99;
    EXPECT_TRUE(throws_code([&] { check_references(b); }, ErrorCode::ReferenceError));
  }
  {
    auto b = fixture_bundle();
    b.evaluations[0].step_critiques[0].node_id = "nowhere";
    EXPECT_TRUE(throws_code([&] { check_references(b); }, ErrorCode::ReferenceError));
  }
  {
    auto b = fixture_bundle();
    b.node_stats.at("planner").issue_counts["I9"] = 1;
    EXPECT_TRUE(throws_code([&] { check_references(b); }, ErrorCode::ReferenceError));
  }
  {
    auto b = fixture_bundle();
    b.system_insights->insights[0].frequency += 1;
    EXPECT_TRUE(throws_code([&] { check_references(b); }, ErrorCode::ReferenceError));
  }
  {
    // Same damage arriving through an archive.
    auto bytes = bundle_bytes(fixture_bundle());
    auto m = members(bytes);
    Json sys = Json::parse(m.at("insights/system.json"));
    sys["insights"][0]["instance_refs"][0]["trace_id"] = "ghost";
    m["insights/system.json"] = sys.dump(2) + "\n";
    EXPECT_TRUE(throws_code([&] { parse_bundle(rebuild(m, names_of(bytes))); }, ErrorCode::ReferenceError));
  }
}

// --- golden -----------------------------------------------------------------------

TEST(Golden, MockRunMatchesHandDerivation) {
  EXPECT_TRUE(testsupport::matches_hand_derivation(fixture_bundle()));
}

TEST(Golden, MockRunIsByteIdenticalToCommittedBundle) {
  auto bytes = bundle_bytes(fixture_bundle());
  const auto path = testsupport::golden_bundle_path();
  if (std::getenv("UPDATE_GOLDEN")) {
    write_file_bytes(path, bytes);
    GTEST_SKIP() << "rewrote " << path;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << "run with UPDATE_GOLDEN=1 to create " << path;
  EXPECT_TRUE(read_file_bytes(path) == bytes);
  // A second, independent run agrees too.
  auto again = build_bundle(testsupport::golden_config(std::filesystem::temp_directory_path()),
                            testsupport::reproducible_options());
  EXPECT_TRUE(bundle_bytes(again) == bytes);
}
