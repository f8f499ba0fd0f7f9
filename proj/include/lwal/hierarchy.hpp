#pragma once

#include <string>
#include <utility>
#include <vector>

namespace lwal {

// Rooted tree over named nodes, used as the semantic gold standard for the
// learned labels. Leaves whose names match dataset class names define the
// class-to-tree mapping.
//
// File format: UTF-8 text, one edge per line, "parent<TAB>child".
class HierarchyTree {
  public:
    struct Node {
        std::string name;
        int parent = -1;
        std::vector<int> children;
    };

    static HierarchyTree from_edges(const std::vector<std::pair<std::string, std::string>>& edges);
    static HierarchyTree load_tsv(const std::string& path);
    void save_tsv(const std::string& path) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }
    std::size_t size() const { return nodes_.size(); }

    // Node id by name, -1 when absent.
    int find(const std::string& name) const;
    bool is_leaf(int id) const { return nodes_[static_cast<std::size_t>(id)].children.empty(); }
    std::vector<std::string> leaf_names() const;
    int depth(int id) const; // root has depth 0

  private:
    int add_node(const std::string& name);
    void validate();

    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace lwal
