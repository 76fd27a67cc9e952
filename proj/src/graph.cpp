#include "baed/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "baed/rng.hpp"

namespace baed {

namespace {

// %.17g round-trips IEEE doubles exactly
std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool is_comment_or_blank(const std::string& line) {
    for (char ch : line) {
        if (ch == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(ch))) return false;
    }
    return true;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

double Graph::average_degree() const {
    return node_count == 0 ? 0.0 : 2.0 * edge_count() / node_count;
}

int Graph::edge_id(int u, int v) const {
    if (u > v) std::swap(u, v);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(u, v));
    if (it == edges.end() || *it != std::make_pair(u, v)) return -1;
    return static_cast<int>(it - edges.begin());
}

void Graph::validate() const {
    if (class_count < 2) {
        throw ValidationError("graph: class_count must be >= 2");
    }
    for (size_t e = 0; e < edges.size(); ++e) {
        auto [u, v] = edges[e];
        if (u >= v) {
            throw ValidationError("graph: edge not normalized or self-loop");
        }
        if (u < 0 || v >= node_count) {
            throw ValidationError("graph: edge endpoint out of range");
        }
        if (e > 0 && edges[e - 1] == edges[e]) {
            throw ValidationError("graph: duplicate edge");
        }
    }
    if (static_cast<int>(adjacency.size()) != node_count) {
        throw ValidationError("graph: adjacency size mismatch");
    }
    for (int i = 0; i < node_count; ++i) {
        for (size_t k = 0; k < adjacency[static_cast<size_t>(i)].size(); ++k) {
            int j = adjacency[static_cast<size_t>(i)][k];
            const auto& back = adjacency[static_cast<size_t>(j)];
            if (!std::binary_search(back.begin(), back.end(), i)) {
                throw ValidationError("graph: adjacency not symmetric");
            }
        }
    }
    for (const auto& [node, cls] : labels) {
        if (node < 0 || node >= node_count) {
            throw ValidationError("graph: labeled node out of range");
        }
        if (cls < 0 || cls >= class_count) {
            throw ValidationError("graph: label out of range");
        }
    }
    for (const auto& [node, feat] : features) {
        if (!labels.count(node)) {
            throw ValidationError("graph: feature on unlabeled node " + std::to_string(node));
        }
        (void)feat;
    }
}

Graph make_graph(int node_count, int class_count, std::vector<std::pair<int, int>> edges,
                 std::map<int, int> labels, std::map<int, std::vector<double>> features) {
    Graph g;
    g.node_count = node_count;
    g.class_count = class_count;
    for (auto& [u, v] : edges) {
        if (u == v) {
            throw ValidationError("make_graph: self-loop " + std::to_string(u));
        }
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    g.edges = std::move(edges);
    g.labels = std::move(labels);
    g.features = std::move(features);

    g.adjacency.assign(static_cast<size_t>(node_count), {});
    g.adj_edge_ids.assign(static_cast<size_t>(node_count), {});
    for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        g.adjacency[static_cast<size_t>(u)].push_back(v);
        g.adjacency[static_cast<size_t>(v)].push_back(u);
        g.adj_edge_ids[static_cast<size_t>(u)].push_back(static_cast<int>(e));
        g.adj_edge_ids[static_cast<size_t>(v)].push_back(static_cast<int>(e));
    }
    g.validate();
    return g;
}

Graph load_graph(const std::string& edge_path, const std::string& label_path,
                 const std::string& feature_path, int class_count, LoadStats* stats) {
    LoadStats local;
    LoadStats& st = stats ? *stats : local;

    std::ifstream edge_file(edge_path);
    if (!edge_file) {
        throw ValidationError("cannot open edge file " + edge_path);
    }
    std::vector<std::pair<int, int>> raw_edges;
    std::set<int> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(edge_file, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        long long a, b;
        if (!(ss >> a >> b)) {
            parse_fail(edge_path, line_no, "expected 'src_id dst_id'");
        }
        std::string rest;
        if (ss >> rest) {
            parse_fail(edge_path, line_no, "trailing token '" + rest + "'");
        }
        raw_edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
        ids.insert(static_cast<int>(a));
        ids.insert(static_cast<int>(b));
    }

    std::map<int, int> raw_labels;
    std::ifstream label_file(label_path);
    if (!label_file) {
        throw ValidationError("cannot open label file " + label_path);
    }
    line_no = 0;
    while (std::getline(label_file, line)) {
        ++line_no;
        if (is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        long long node, cls;
        if (!(ss >> node >> cls)) {
            parse_fail(label_path, line_no, "expected 'node_id class_index'");
        }
        if (cls < 0 || cls >= class_count) {
            throw ValidationError(label_path + ":" + std::to_string(line_no) + ": label " +
                                  std::to_string(cls) + " outside [0," +
                                  std::to_string(class_count) + ")");
        }
        raw_labels[static_cast<int>(node)] = static_cast<int>(cls);
        ids.insert(static_cast<int>(node));
    }

    std::map<int, std::vector<double>> raw_features;
    if (!feature_path.empty()) {
        std::ifstream feature_file(feature_path);
        if (!feature_file) {
            throw ValidationError("cannot open feature file " + feature_path);
        }
        line_no = 0;
        int dim = -1;
        while (std::getline(feature_file, line)) {
            ++line_no;
            if (is_comment_or_blank(line)) continue;
            std::istringstream ss(line);
            long long node;
            if (!(ss >> node)) {
                parse_fail(feature_path, line_no, "expected 'node_id f1 ... fd'");
            }
            std::vector<double> feat;
            double v;
            while (ss >> v) feat.push_back(v);
            if (!ss.eof()) {
                parse_fail(feature_path, line_no, "non-numeric feature value");
            }
            if (feat.empty()) {
                parse_fail(feature_path, line_no, "no feature values");
            }
            if (dim < 0) {
                dim = static_cast<int>(feat.size());
            } else if (static_cast<int>(feat.size()) != dim) {
                parse_fail(feature_path, line_no, "feature dimension changed");
            }
            if (!raw_labels.count(static_cast<int>(node))) {
                throw ValidationError(feature_path + ":" + std::to_string(line_no) +
                                      ": feature for unlabeled node " + std::to_string(node));
            }
            raw_features[static_cast<int>(node)] = std::move(feat);
            ids.insert(static_cast<int>(node));
        }
    }

    // densify ids in ascending order; identity when the input is already dense
    std::map<int, int> to_dense;
    st.id_map.clear();
    for (int id : ids) {
        to_dense[id] = static_cast<int>(st.id_map.size());
        st.id_map.push_back(id);
    }

    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> edges;
    for (auto [a, b] : raw_edges) {
        if (a == b) {
            ++st.dropped_self_loops;
            continue;
        }
        int u = to_dense[a], v = to_dense[b];
        if (u > v) std::swap(u, v);
        if (!seen.insert({u, v}).second) {
            ++st.dropped_duplicate_edges;
            continue;
        }
        edges.emplace_back(u, v);
    }

    std::map<int, int> labels;
    for (auto [node, cls] : raw_labels) labels[to_dense[node]] = cls;
    std::map<int, std::vector<double>> features;
    for (auto& [node, feat] : raw_features) features[to_dense[node]] = std::move(feat);

    return make_graph(static_cast<int>(st.id_map.size()), class_count, std::move(edges),
                      std::move(labels), std::move(features));
}

void write_graph(const Graph& graph, const std::string& edge_path, const std::string& label_path,
                 const std::string& feature_path) {
    {
        std::ofstream out(edge_path);
        if (!out) throw ValidationError("cannot write " + edge_path);
        for (auto [u, v] : graph.edges) {
            out << u << ' ' << v << '\n';
        }
    }
    {
        std::ofstream out(label_path);
        if (!out) throw ValidationError("cannot write " + label_path);
        for (const auto& [node, cls] : graph.labels) {
            out << node << ' ' << cls << '\n';
        }
    }
    if (!feature_path.empty() && !graph.features.empty()) {
        std::ofstream out(feature_path);
        if (!out) throw ValidationError("cannot write " + feature_path);
        for (const auto& [node, feat] : graph.features) {
            out << node;
            for (double v : feat) {
                out << ' ' << format_double(v);
            }
            out << '\n';
        }
    }
}

Graph generate_sbm(int n, int class_count, double p_in, double p_out, int feature_dim,
                   uint64_t seed) {
    if (class_count < 2) {
        throw ValidationError("generate_sbm: class_count must be >= 2");
    }
    if (n < class_count) {
        throw ValidationError("generate_sbm: n < class_count");
    }
    if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
        throw ValidationError("generate_sbm: need 0 <= p_out <= p_in <= 1");
    }
    if (feature_dim < 0) {
        throw ValidationError("generate_sbm: feature_dim < 0");
    }

    rng::Engine engine(seed);
    std::map<int, int> labels;
    for (int i = 0; i < n; ++i) {
        labels[i] = i % class_count;
    }

    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double p = (labels[i] == labels[j]) ? p_in : p_out;
            if (engine.next_double() < p) {
                edges.emplace_back(i, j);
            }
        }
    }

    std::map<int, std::vector<double>> features;
    if (feature_dim > 0) {
        // class mean 3*e_{c mod d}: 3 sigma separation from the origin
        for (int i = 0; i < n; ++i) {
            std::vector<double> feat(static_cast<size_t>(feature_dim));
            for (int d = 0; d < feature_dim; ++d) {
                feat[static_cast<size_t>(d)] = engine.next_normal();
            }
            feat[static_cast<size_t>(labels[i] % feature_dim)] += 3.0;
            features[i] = std::move(feat);
        }
    }

    return make_graph(n, class_count, std::move(edges), std::move(labels), std::move(features));
}

bool Split::contains_labeled(int v) const {
    return std::binary_search(labeled.begin(), labeled.end(), v);
}

bool Split::contains_target(int v) const {
    return std::binary_search(target.begin(), target.end(), v);
}

Split make_split(const Graph& graph, double ratio, int target_cap, uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ValidationError("make_split: ratio outside (0,1)");
    }
    if (target_cap < 0) {
        throw ValidationError("make_split: target_cap < 0");
    }

    std::vector<int> pool;  // nodes with ground-truth labels, ascending
    for (const auto& [node, cls] : graph.labels) {
        pool.push_back(node);
        (void)cls;
    }

    const int want = static_cast<int>(std::llround(ratio * graph.node_count));
    const int labeled_count = std::min<int>(want, static_cast<int>(pool.size()));

    rng::Engine engine(seed);
    Split split;
    split.ratio = ratio;

    std::vector<std::vector<int>> by_class(static_cast<size_t>(graph.class_count));
    for (int node : pool) {
        by_class[static_cast<size_t>(graph.labels.at(node))].push_back(node);
    }
    int present = 0;
    for (const auto& cls : by_class) {
        if (!cls.empty()) ++present;
    }

    if (labeled_count >= present && present > 0) {
        // proportional quotas with largest remainder, at least one per class
        std::vector<int> quota(static_cast<size_t>(graph.class_count), 0);
        std::vector<std::pair<double, int>> remainders;
        int assigned = 0;
        for (int c = 0; c < graph.class_count; ++c) {
            if (by_class[static_cast<size_t>(c)].empty()) continue;
            double exact = static_cast<double>(labeled_count) *
                           static_cast<double>(by_class[static_cast<size_t>(c)].size()) /
                           static_cast<double>(pool.size());
            int q = std::max(1, static_cast<int>(exact));
            q = std::min<int>(q, static_cast<int>(by_class[static_cast<size_t>(c)].size()));
            quota[static_cast<size_t>(c)] = q;
            assigned += q;
            remainders.emplace_back(exact - q, c);
        }
        // hand out the remainder by largest fractional part, then by class id
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        size_t idx = 0;
        while (assigned < labeled_count && !remainders.empty()) {
            int c = remainders[idx % remainders.size()].second;
            if (quota[static_cast<size_t>(c)] <
                static_cast<int>(by_class[static_cast<size_t>(c)].size())) {
                ++quota[static_cast<size_t>(c)];
                ++assigned;
            }
            ++idx;
            if (idx > remainders.size() * static_cast<size_t>(labeled_count + 1)) break;
        }
        while (assigned > labeled_count) {
            // trim the largest quotas back down, preserving the >=1 floor
            int best = -1;
            for (int c = 0; c < graph.class_count; ++c) {
                if (quota[static_cast<size_t>(c)] > 1 &&
                    (best < 0 || quota[static_cast<size_t>(c)] > quota[static_cast<size_t>(best)])) {
                    best = c;
                }
            }
            if (best < 0) break;
            --quota[static_cast<size_t>(best)];
            --assigned;
        }
        for (int c = 0; c < graph.class_count; ++c) {
            auto& members = by_class[static_cast<size_t>(c)];
            if (members.empty() || quota[static_cast<size_t>(c)] == 0) continue;
            engine.shuffle(members);
            for (int k = 0; k < quota[static_cast<size_t>(c)]; ++k) {
                split.labeled.push_back(members[static_cast<size_t>(k)]);
            }
        }
        split.stratified = true;
    } else {
        // fewer labels than classes: plain uniform sample
        std::vector<int> shuffled = pool;
        engine.shuffle(shuffled);
        split.labeled.assign(shuffled.begin(), shuffled.begin() + labeled_count);
        split.stratified = false;
    }
    std::sort(split.labeled.begin(), split.labeled.end());

    std::vector<int> remaining;
    for (int node : pool) {
        if (!split.contains_labeled(node)) remaining.push_back(node);
    }
    engine.shuffle(remaining);
    const int target_count = std::min<int>(target_cap, static_cast<int>(remaining.size()));
    split.target.assign(remaining.begin(), remaining.begin() + target_count);
    std::sort(split.target.begin(), split.target.end());
    return split;
}

}  // namespace baed
