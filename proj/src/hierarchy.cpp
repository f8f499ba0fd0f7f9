#include "lwal/hierarchy.hpp"

#include <fstream>
#include <unordered_map>

#include "lwal/errors.hpp"

namespace lwal {

int HierarchyTree::add_node(const std::string& name) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name == name) {
            return static_cast<int>(i);
        }
    }
    nodes_.push_back(Node{name, -1, {}});
    return static_cast<int>(nodes_.size() - 1);
}

HierarchyTree HierarchyTree::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
    if (edges.empty()) {
        throw DataError("hierarchy has no edges");
    }
    HierarchyTree tree;
    for (const auto& [parent, child] : edges) {
        if (parent.empty() || child.empty()) {
            throw DataError("hierarchy edge with empty node name");
        }
        const int p = tree.add_node(parent);
        const int c = tree.add_node(child);
        Node& cn = tree.nodes_[static_cast<std::size_t>(c)];
        if (cn.parent != -1 && cn.parent != p) {
            throw DataError("hierarchy node '" + child + "' has two parents");
        }
        if (cn.parent == p) {
            continue; // duplicate edge
        }
        cn.parent = p;
        tree.nodes_[static_cast<std::size_t>(p)].children.push_back(c);
    }
    tree.validate();
    return tree;
}

void HierarchyTree::validate() {
    int root = -1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].parent == -1) {
            if (root != -1) {
                throw DataError("hierarchy has more than one root ('" +
                                nodes_[static_cast<std::size_t>(root)].name + "' and '" +
                                nodes_[i].name + "')");
            }
            root = static_cast<int>(i);
        }
    }
    if (root == -1) {
        throw DataError("hierarchy has no root (cycle)");
    }
    root_ = root;

    // Parent walk from every node must reach the root without repeating.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        int cur = static_cast<int>(i);
        std::size_t hops = 0;
        while (cur != root) {
            cur = nodes_[static_cast<std::size_t>(cur)].parent;
            if (cur == -1 || ++hops > nodes_.size()) {
                throw DataError("hierarchy contains a cycle or detached subtree");
            }
        }
    }
}

HierarchyTree HierarchyTree::load_tsv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot open hierarchy file: " + path);
    }
    std::vector<std::pair<std::string, std::string>> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("hierarchy line " + std::to_string(lineno) +
                            " is not 'parent<TAB>child': " + path);
        }
        edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return from_edges(edges);
}

void HierarchyTree::save_tsv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write hierarchy file: " + path);
    }
    for (const Node& n : nodes_) {
        for (int c : n.children) {
            os << n.name << '\t' << nodes_[static_cast<std::size_t>(c)].name << '\n';
        }
    }
}

int HierarchyTree::find(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<std::string> HierarchyTree::leaf_names() const {
    std::vector<std::string> out;
    for (const Node& n : nodes_) {
        if (n.children.empty()) {
            out.push_back(n.name);
        }
    }
    return out;
}

int HierarchyTree::depth(int id) const {
    int d = 0;
    int cur = id;
    while (nodes_[static_cast<std::size_t>(cur)].parent != -1) {
        cur = nodes_[static_cast<std::size_t>(cur)].parent;
        ++d;
    }
    return d;
}

} // namespace lwal
