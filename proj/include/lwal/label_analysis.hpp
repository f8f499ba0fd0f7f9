#pragma once

#include <span>
#include <string>
#include <vector>

#include "lwal/hierarchy.hpp"
#include "lwal/tensor.hpp"

namespace lwal {

// Unweighted path lengths (edge counts) between the leaves mapped to the
// given class names; diagonal 0. Every class name must match a leaf.
Tensor tree_distances(const HierarchyTree& tree, const std::vector<std::string>& classes);

// Plain Euclidean distances between the rows of an N x d matrix (no
// smoothing term here).
Tensor label_distances(const Tensor& vectors);

// Kendall's tau-b with tie correction. Returns 0 when either input is fully
// tied (the statistic is 0/0 there and a fully tied vector carries no
// ordinal information).
double kendall_tau_b(std::span<const double> a, std::span<const double> b);

// Mean over classes of tau_b between the reference and learned distance
// rows (diagonal excluded).
double correlation_score(const Tensor& learned, const Tensor& reference);

// The per-class tau_b values behind correlation_score.
std::vector<double> per_class_tau(const Tensor& learned, const Tensor& reference);

// Binary merge tree from agglomerative clustering. Nodes 0..N-1 are the
// leaves (height 0); each later node records one merge. Last node is the
// root. Merge heights are nondecreasing.
struct Dendrogram {
    struct Node {
        int left = -1;
        int right = -1;
        double height = 0.0;
        std::string name; // leaves only
    };
    std::vector<Node> nodes;
    std::size_t num_leaves = 0;

    int root() const { return static_cast<int>(nodes.size()) - 1; }
    bool is_leaf(int id) const { return nodes[static_cast<std::size_t>(id)].left < 0; }
};

// Agglomerative clustering with average linkage (mean of all cross-pair
// distances). The globally closest pair merges each round; ties break on
// the lexicographically smallest (i, j) cluster-id pair. Merged clusters
// get ids N, N+1, ... in merge order.
Dendrogram average_linkage(const Tensor& dist, const std::vector<std::string>& names);

// Newick text with branch lengths = parent height - child height; names
// containing spaces are single-quoted; ends with ";".
std::string export_newick(const Dendrogram& dendro);

// Inverse of export_newick (topology and heights, up to float formatting).
Dendrogram parse_newick(const std::string& text);

} // namespace lwal
