#include <sstream>

#include "doctest.h"
#include "gdcl/checkpoint.hpp"

using namespace gdcl;
using namespace gdcl::nnet;

TEST_CASE("checkpoint round trip reproduces the model exactly") {
  Rng rng(1);
  nnet::Model m(5, std::vector<std::size_t>{7, 3}, rng);
  m.add_head(2, rng);
  m.add_head(4, rng);
  std::stringstream buf;
  save_checkpoint(buf, m);
  const nnet::Model back = load_checkpoint(buf);
  CHECK(back.params() == m.params());
  CHECK(back.head_sizes() == m.head_sizes());
  CHECK(back.input_dim() == 5);
  CHECK(nnet::fingerprint(back) == nnet::fingerprint(m));
}

TEST_CASE("checkpoint loader rejects foreign or truncated data") {
  std::stringstream junk("not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(junk), InvalidInput);

  Rng rng(2);
  nnet::Model m(2, std::vector<std::size_t>{2}, rng);
  m.add_head(2, rng);
  std::stringstream buf;
  save_checkpoint(buf, m);
  std::string bytes = buf.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(cut), InvalidInput);
}
