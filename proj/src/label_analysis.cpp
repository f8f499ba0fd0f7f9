#include "lwal/label_analysis.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "lwal/errors.hpp"

namespace lwal {

Tensor tree_distances(const HierarchyTree& tree, const std::vector<std::string>& classes) {
    const std::size_t n = classes.size();
    std::vector<int> leaf_ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int id = tree.find(classes[i]);
        if (id == -1 || !tree.is_leaf(id)) {
            throw DataError("class '" + classes[i] + "' is not a leaf of the hierarchy");
        }
        leaf_ids[i] = id;
    }
    std::vector<int> depths(n);
    for (std::size_t i = 0; i < n; ++i) {
        depths[i] = tree.depth(leaf_ids[i]);
    }
    // Path length = depth(a) + depth(b) - 2 * depth(lca).
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            int a = leaf_ids[i], b = leaf_ids[j];
            int da = depths[i], db = depths[j];
            while (da > db) {
                a = tree.nodes()[static_cast<std::size_t>(a)].parent;
                --da;
            }
            while (db > da) {
                b = tree.nodes()[static_cast<std::size_t>(b)].parent;
                --db;
            }
            while (a != b) {
                a = tree.nodes()[static_cast<std::size_t>(a)].parent;
                b = tree.nodes()[static_cast<std::size_t>(b)].parent;
                --da;
            }
            const double d = static_cast<double>(depths[i] + depths[j] - 2 * da);
            out.at(i, j) = d;
            out.at(j, i) = d;
        }
    }
    return out;
}

Tensor label_distances(const Tensor& vectors) {
    if (vectors.ndim() != 2) {
        throw ShapeError("label_distances: expected an N x d matrix");
    }
    const std::size_t n = vectors.rows(), d = vectors.cols();
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = vectors[i * d + k] - vectors[j * d + k];
                s += diff * diff;
            }
            const double dist = std::sqrt(s);
            out.at(i, j) = dist;
            out.at(j, i) = dist;
        }
    }
    return out;
}

double kendall_tau_b(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("kendall_tau_b: input lengths differ");
    }
    const std::size_t n = a.size();
    if (n < 2) {
        throw DomainError("kendall_tau_b: need at least two entries");
    }
    long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ++ties_a;
            if (db == 0.0) ++ties_b;
            if (da != 0.0 && db != 0.0) {
                if ((da > 0.0) == (db > 0.0)) {
                    ++concordant;
                } else {
                    ++discordant;
                }
            }
        }
    }
    const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    const long long fa = n0 - ties_a;
    const long long fb = n0 - ties_b;
    if (fa == 0 || fb == 0) {
        return 0.0; // fully tied input carries no ordinal information
    }
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(fa) * static_cast<double>(fb));
}

std::vector<double> per_class_tau(const Tensor& learned, const Tensor& reference) {
    if (learned.ndim() != 2 || reference.ndim() != 2 || !learned.same_shape(reference) ||
        learned.rows() != learned.cols()) {
        throw ShapeError("correlation_score: matrices must be square and of equal order");
    }
    const std::size_t n = learned.rows();
    std::vector<double> taus(n, 0.0);
    if (n < 3) {
        return taus; // rows shorter than 2 entries have no pair information
    }
    std::vector<double> ref_row(n - 1), lrn_row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            ref_row[k] = reference.at(i, j);
            lrn_row[k] = learned.at(i, j);
            ++k;
        }
        taus[i] = kendall_tau_b(ref_row, lrn_row);
    }
    return taus;
}

double correlation_score(const Tensor& learned, const Tensor& reference) {
    const std::vector<double> taus = per_class_tau(learned, reference);
    double s = 0.0;
    for (double t : taus) {
        s += t;
    }
    return s / static_cast<double>(taus.size());
}

Dendrogram average_linkage(const Tensor& dist, const std::vector<std::string>& names) {
    if (dist.ndim() != 2 || dist.rows() != dist.cols()) {
        throw ShapeError("average_linkage: distance matrix must be square");
    }
    const std::size_t n = dist.rows();
    if (n < 2) {
        throw DomainError("average_linkage: need at least two points");
    }
    if (names.size() != n) {
        throw ShapeError("average_linkage: one name per point required");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (dist.at(i, i) != 0.0) {
            throw DomainError("average_linkage: diagonal must be zero");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dist.at(i, j) != dist.at(j, i)) {
                throw DomainError("average_linkage: matrix must be symmetric");
            }
        }
    }

    const std::size_t total = 2 * n - 1;
    Dendrogram dendro;
    dendro.num_leaves = n;
    dendro.nodes.resize(total);
    for (std::size_t i = 0; i < n; ++i) {
        dendro.nodes[i].name = names[i];
    }

    // Pairwise cluster distances, grown as merges create new cluster ids.
    std::vector<std::vector<double>> d(total, std::vector<double>(total, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d[i][j] = dist.at(i, j);
        }
    }
    std::vector<bool> active(total, false);
    std::vector<std::size_t> sizes(total, 0);
    for (std::size_t i = 0; i < n; ++i) {
        active[i] = true;
        sizes[i] = 1;
    }

    for (std::size_t merge = 0; merge < n - 1; ++merge) {
        // Ascending scan with strict < keeps ties on the lexicographically
        // smallest (i, j) id pair.
        std::size_t bi = 0, bj = 0;
        double best = 0.0;
        bool found = false;
        const std::size_t limit = n + merge;
        for (std::size_t i = 0; i < limit; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < limit; ++j) {
                if (!active[j]) continue;
                if (!found || d[i][j] < best) {
                    best = d[i][j];
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        const std::size_t id = n + merge;
        dendro.nodes[id].left = static_cast<int>(bi);
        dendro.nodes[id].right = static_cast<int>(bj);
        dendro.nodes[id].height = best;
        sizes[id] = sizes[bi] + sizes[bj];
        // Average linkage via the size-weighted update.
        for (std::size_t k = 0; k < id; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double nd = (static_cast<double>(sizes[bi]) * d[bi][k] +
                               static_cast<double>(sizes[bj]) * d[bj][k]) /
                              static_cast<double>(sizes[id]);
            d[id][k] = nd;
            d[k][id] = nd;
        }
        active[bi] = false;
        active[bj] = false;
        active[id] = true;
    }
    return dendro;
}

namespace {

bool needs_quoting(const std::string& name) {
    if (name.empty()) {
        return true;
    }
    return name.find_first_of(" ()[]{}:;,'\t\n") != std::string::npos;
}

std::string format_name(const std::string& name) {
    if (!needs_quoting(name)) {
        return name;
    }
    std::string out = "'";
    for (char c : name) {
        out += c;
        if (c == '\'') out += '\''; // quote doubling
    }
    out += '\'';
    return out;
}

std::string format_length(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

void write_node(const Dendrogram& dendro, int id, double parent_height, bool is_root,
                std::string& out) {
    const Dendrogram::Node& node = dendro.nodes[static_cast<std::size_t>(id)];
    if (dendro.is_leaf(id)) {
        out += format_name(node.name);
    } else {
        out += '(';
        write_node(dendro, node.left, node.height, false, out);
        out += ',';
        write_node(dendro, node.right, node.height, false, out);
        out += ')';
    }
    if (!is_root) {
        out += ':';
        out += format_length(parent_height - node.height);
    }
}

struct NewickParser {
    const std::string& text;
    std::size_t pos = 0;

    explicit NewickParser(const std::string& t) : text(t) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError("newick parse error at offset " + std::to_string(pos) + ": " + msg);
    }

    char peek() const {
        if (pos >= text.size()) {
            throw DataError("newick parse error: unexpected end of input");
        }
        return text[pos];
    }

    void expect(char c) {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos;
    }

    std::string parse_name() {
        std::string name;
        if (peek() == '\'') {
            ++pos;
            while (true) {
                const char c = peek();
                ++pos;
                if (c == '\'') {
                    if (pos < text.size() && text[pos] == '\'') {
                        name += '\'';
                        ++pos;
                    } else {
                        break;
                    }
                } else {
                    name += c;
                }
            }
        } else {
            while (pos < text.size()) {
                const char c = text[pos];
                if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';') break;
                name += c;
                ++pos;
            }
            if (name.empty()) {
                fail("expected a leaf name");
            }
        }
        return name;
    }

    double parse_length() {
        expect(':');
        const std::size_t start = pos;
        while (pos < text.size()) {
            const char c = text[pos];
            if (c == ',' || c == ')' || c == ';') break;
            ++pos;
        }
        try {
            return std::stod(text.substr(start, pos - start));
        } catch (const std::exception&) {
            fail("bad branch length");
        }
    }

    struct TempNode {
        std::string name;
        double branch = 0.0;
        std::vector<std::unique_ptr<TempNode>> children;
    };

    std::unique_ptr<TempNode> parse_subtree() {
        auto node = std::make_unique<TempNode>();
        if (peek() == '(') {
            ++pos;
            node->children.push_back(parse_subtree());
            expect(',');
            node->children.push_back(parse_subtree());
            expect(')');
            if (node->children.size() != 2) {
                fail("expected a binary node");
            }
        } else {
            node->name = parse_name();
        }
        if (pos < text.size() && text[pos] == ':') {
            node->branch = parse_length();
        }
        return node;
    }
};

void collect_leaves(const NewickParser::TempNode& node,
                    std::vector<const NewickParser::TempNode*>& leaves) {
    if (node.children.empty()) {
        leaves.push_back(&node);
        return;
    }
    for (const auto& child : node.children) {
        collect_leaves(*child, leaves);
    }
}

// Leaves get ids 0..N-1 in encounter order, internal nodes follow in post
// order; heights are rebuilt from branch lengths with leaves at height 0.
int build_nodes(const NewickParser::TempNode& node, Dendrogram& out,
                const std::vector<const NewickParser::TempNode*>& leaves, double& height) {
    if (node.children.empty()) {
        height = 0.0;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            if (leaves[i] == &node) {
                return static_cast<int>(i);
            }
        }
        throw DataError("newick parse error: leaf bookkeeping failed");
    }
    double hl = 0.0, hr = 0.0;
    const int left = build_nodes(*node.children[0], out, leaves, hl);
    const int right = build_nodes(*node.children[1], out, leaves, hr);
    (void)hr;
    Dendrogram::Node merged;
    merged.left = left;
    merged.right = right;
    merged.height = hl + node.children[0]->branch;
    out.nodes.push_back(merged);
    height = merged.height;
    return static_cast<int>(out.nodes.size()) - 1;
}

} // namespace

std::string export_newick(const Dendrogram& dendro) {
    if (dendro.nodes.empty()) {
        throw UsageError("export_newick: empty dendrogram");
    }
    std::string out;
    write_node(dendro, dendro.root(), 0.0, true, out);
    out += ';';
    return out;
}

Dendrogram parse_newick(const std::string& text) {
    NewickParser parser(text);
    auto tmp = parser.parse_subtree();
    parser.expect(';');

    std::vector<const NewickParser::TempNode*> leaves;
    collect_leaves(*tmp, leaves);
    if (leaves.empty()) {
        throw DataError("newick tree has no leaves");
    }
    Dendrogram out;
    out.num_leaves = leaves.size();
    out.nodes.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        out.nodes[i].name = leaves[i]->name;
    }
    double h = 0.0;
    build_nodes(*tmp, out, leaves, h);
    return out;
}

} // namespace lwal
