#include "phylembed/embed.hpp"
#include "phylembed/error.hpp"
#include "phylembed/tsv.hpp"

namespace phylembed {

void write_embedding(std::ostream& out, const HeteroGraph& graph, const EmbeddingMatrix& emb) {
  if (emb.n_nodes() != graph.n_nodes()) throw Error("write_embedding: row count differs from graph");
  out << "node_name";
  for (std::size_t d = 0; d < emb.dim(); ++d) out << "\tv" << (d + 1);
  out << '\n';
  for (std::size_t v = 0; v < emb.n_nodes(); ++v) {
    out << graph.name(v);
    for (double x : emb.row(v)) out << '\t' << tsv::format_real(x);
    out << '\n';
  }
}

EmbeddingMatrix read_embedding(std::istream& in, const HeteroGraph& graph, EmbedMethod method) {
  std::string line;
  if (!tsv::read_line(in, line)) throw ParseError("embedding: missing header");
  const std::size_t dim = tsv::split(line).size() - 1;
  EmbeddingMatrix emb;
  emb.method = method;
  emb.vectors = Matrix(graph.n_nodes(), dim);
  std::size_t v = 0;
  while (tsv::read_line(in, line)) {
    if (line.empty()) continue;
    auto cells = tsv::split(line);
    if (v >= graph.n_nodes() || cells.size() != dim + 1 || cells[0] != graph.name(v)) {
      throw ParseError("embedding: row " + std::to_string(v + 1) + " does not match the graph");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!tsv::parse_real(cells[d + 1], emb.vectors(v, d))) {
        throw ParseError("embedding: bad value in row " + std::to_string(v + 1));
      }
    }
    ++v;
  }
  if (v != graph.n_nodes()) throw ParseError("embedding: row count differs from graph");
  return emb;
}

}  // namespace phylembed
