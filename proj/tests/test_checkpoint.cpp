#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pcdgan/checkpoint.hpp"
#include "pcdgan/error.hpp"
#include "pcdgan/nn.hpp"

using namespace pcdgan;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pcdgan_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  nn::Generator G(nn::NetworkConfig{}, rng);
  const std::uint64_t arch = nn::fnv1a(G.architecture());
  nn::Checkpoint ckpt = nn::snapshot(arch, G.parameters());
  ckpt.meta["seed"] = "17";
  ckpt.meta["note"] = "value with spaces";
  const auto path = temp_file("roundtrip.ckpt").string();
  nn::save_checkpoint(path, ckpt);

  Rng other(2);
  nn::Generator H(nn::NetworkConfig{}, other);
  const nn::Checkpoint loaded = nn::load_checkpoint(path);
  EXPECT_EQ(loaded.arch_hash, arch);
  EXPECT_EQ(loaded.meta.at("seed"), "17");
  EXPECT_EQ(loaded.meta.at("note"), "value with spaces");
  nn::restore(loaded, arch, H.parameters());
  const auto gp = G.parameters(), hp = H.parameters();
  for (std::size_t k = 0; k < gp.size(); ++k) {
    for (std::size_t i = 0; i < gp[k].tensor.size(); ++i) {
      ASSERT_EQ(gp[k].tensor[i], hp[k].tensor[i]) << gp[k].name;
    }
  }
}

TEST(Checkpoint, SecondSaveIsByteIdentical) {
  Rng rng(3);
  nn::Discriminator D(nn::NetworkConfig{}, rng);
  const auto ckpt = nn::snapshot(7, D.parameters());
  const auto a = temp_file("a.ckpt"), b = temp_file("b.ckpt");
  nn::save_checkpoint(a.string(), ckpt);
  nn::save_checkpoint(b.string(), nn::load_checkpoint(a.string()));
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.rfind(nn::kCheckpointMagic, 0), 0u);
}

TEST(Checkpoint, ArchitectureMismatchIsLoadError) {
  Rng rng(4);
  nn::Generator G(nn::NetworkConfig{}, rng);
  const auto path = temp_file("arch.ckpt").string();
  nn::save_checkpoint(path, nn::snapshot(123, G.parameters()));
  EXPECT_THROW(nn::restore(nn::load_checkpoint(path), 124, G.parameters()), LoadError);

  nn::NetworkConfig wide;
  wide.hidden = {64, 64, 64};
  nn::Generator W(wide, rng);
  EXPECT_THROW(nn::restore(nn::load_checkpoint(path), 123, W.parameters()), LoadError);
}

TEST(Checkpoint, MissingOrCorruptFileIsLoadError) {
  EXPECT_THROW(nn::load_checkpoint(temp_file("does_not_exist.ckpt").string()), LoadError);
  const auto bad = temp_file("bad.ckpt");
  std::ofstream(bad) << "not a checkpoint\n";
  EXPECT_THROW(nn::load_checkpoint(bad.string()), LoadError);
  const auto truncated = temp_file("truncated.ckpt");
  std::ofstream(truncated) << nn::kCheckpointMagic << "\narch 0000000000000001\nparam w 1 3\n0x1p+0\n";
  EXPECT_THROW(nn::load_checkpoint(truncated.string()), LoadError);
}

TEST(Checkpoint, HashIsStable) {
  EXPECT_EQ(nn::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(nn::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(nn::hex64(0xabcULL), "0000000000000abc");
}
