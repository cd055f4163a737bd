#include <gtest/gtest.h>

#include <sstream>

#include "efflif/spec_io.hpp"

using namespace efflif;

namespace {
network_spec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_network_spec(in, "test.cfg");
}

const char* kSpec = R"(schema = efflif-net/1
# comment
[network]
input_channels = 2
input_length = 16
timesteps = 4
reset = hard

[layer]
kind = conv1d
out = 8
kernel = 3
padding = 1

[layer]
kind = conv1d
out = 8
kernel = 3
padding = 1   ; trailing comment

[layer]
kind = dense
out = 3

[block]
first = 0
last = 1
scheme = L+C
groups = 4
)";
}  // namespace

TEST(SpecIo, Parses) {
  const auto s = parse(kSpec);
  EXPECT_EQ(s.input_channels, 2u);
  EXPECT_EQ(s.input_length, 16u);
  EXPECT_EQ(s.timesteps, 4u);
  EXPECT_EQ(s.lif.reset, reset_mode::hard);
  EXPECT_DOUBLE_EQ(s.lif.lambda, 0.5);
  ASSERT_EQ(s.layers.size(), 3u);
  EXPECT_EQ(s.layers[1].padding, 1u);
  ASSERT_EQ(s.blocks.size(), 1u);
  EXPECT_EQ(s.blocks[0].scheme.kind, scheme_kind::cross_layer_channel);
  EXPECT_EQ(s.blocks[0].scheme.groups, 4u);
  EXPECT_EQ(s.n_classes(), 3u);
}

TEST(SpecIo, RoundTripAndHash) {
  const auto s = parse(kSpec);
  const auto text = write_network_spec(s);
  const auto back = parse(text);
  EXPECT_EQ(write_network_spec(back), text);
  EXPECT_EQ(spec_hash(back), spec_hash(s));
  auto other = s;
  other.timesteps = 5;
  EXPECT_NE(spec_hash(other), spec_hash(s));
}

TEST(SpecIo, ErrorsCarryLocation) {
  auto expect_error = [](const std::string& text, const std::string& fragment) {
    try {
      parse(text);
      ADD_FAILURE() << "no error for:\n" << text;
    } catch (const config_error& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_error("[network]\ninput_channels = 1\n", "unsupported schema");
  expect_error("schema = efflif-net/2\n", "unsupported schema");
  expect_error("schema = efflif-net/1\n[network]\ninput_channels = x\n", "test.cfg:2");
  expect_error("schema = efflif-net/1\n[network]\ninput_channels = 1\nbogus = 1\n", "unknown key 'bogus'");
  expect_error("schema = efflif-net/1\n[network]\ninput_channels = 1\ninput_channels = 2\n", "duplicate key");
  expect_error("schema = efflif-net/1\n[network\n", "unterminated");
  expect_error("schema = efflif-net/1\n[layer]\nkind = dense\nout = 2\n", "missing [network]");
  expect_error("schema = efflif-net/1\n[network]\ninput_channels = 1\n[layer]\nkind = lstm\nout = 2\n",
               "unknown layer kind");
  expect_error("schema = efflif-net/1\n[network]\ninput_channels = 1\nlambda = 2\n[layer]\nkind = dense\nout = 2\n",
               "lambda");
  expect_error("schema = efflif-net/1\njunk\n", "expected 'key = value'");
}

TEST(SpecIo, ValidatesBlocks) {
  const std::string head = "schema = efflif-net/1\n[network]\ninput_channels = 2\n"
                           "[layer]\nkind = dense\nout = 4\n[layer]\nkind = dense\nout = 6\n[layer]\nkind = dense\nout = 2\n";
  EXPECT_THROW(parse(head + "[block]\nfirst = 0\nlast = 1\nscheme = layer\n"), error);       // shape mismatch
  EXPECT_THROW(parse(head + "[block]\nfirst = 0\nlast = 0\nscheme = channel\ngroups = 3\n"), error);
  EXPECT_THROW(parse(head + "[block]\nfirst = 0\nlast = 2\nscheme = layer\n"), error);       // readout in block
  EXPECT_NO_THROW(parse(head + "[block]\nfirst = 1\nlast = 1\nscheme = channel\ngroups = 3\n"));
}

TEST(SpecIo, IniParserKeepsRepeatedSections) {
  std::istringstream in("a = 1\n[x]\nk = 1\n[x]\nk = 2\n");
  const auto doc = parse_ini(in);
  ASSERT_EQ(doc.sections.size(), 2u);
  EXPECT_EQ(*doc.sections[1].find("k"), "2");
  EXPECT_EQ(*doc.globals.find("a"), "1");
}
