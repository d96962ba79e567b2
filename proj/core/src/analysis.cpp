#include "promptopt/analysis.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "promptopt/errors.hpp"
#include "promptopt/strings.hpp"

namespace promptopt {

namespace {

std::string strip_cluster_prefix(std::string_view text) {
    const std::string_view t = trim(text);
    if (t.substr(0, 7) == "Cluster") {
        std::size_t i = 7;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
            ++i;
        }
        if (i > 7 && i < t.size() && t[i] == ':') {
            return std::string(trim(t.substr(i + 1)));
        }
    }
    return std::string(t);
}

bool description_matches(std::string_view a, std::string_view b) {
    const std::string la = to_lower(trim(a));
    const std::string lb = to_lower(trim(b));
    if (la.empty() || lb.empty()) {
        return false;
    }
    return la == lb || la.rfind(lb, 0) == 0 || lb.rfind(la, 0) == 0;
}

}  // namespace

std::string ClusterCatalog::add(const std::string& description) {
    const std::string desc = strip_cluster_prefix(description);
    for (const Cluster& c : clusters_) {
        if (description_matches(c.description, desc)) {
            return c.id;  // descriptions stay unique within a catalog
        }
    }
    Cluster c;
    c.id = fmt::format("Cluster{}", clusters_.size() + 1);
    c.description = desc;
    clusters_.push_back(c);
    return clusters_.back().id;
}

const Cluster* ClusterCatalog::find(const std::string& id_or_description) const {
    const std::string_view t = trim(id_or_description);
    if (t.substr(0, 7) == "Cluster") {
        std::size_t i = 7;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
            ++i;
        }
        if (i > 7 && (i == t.size() || t[i] == ':')) {
            const int n = std::stoi(std::string(t.substr(7, i - 7)));
            if (n >= 1 && n <= static_cast<int>(clusters_.size())) {
                return &clusters_[n - 1];
            }
        }
    }
    const std::string desc = strip_cluster_prefix(id_or_description);
    for (const Cluster& c : clusters_) {
        if (description_matches(c.description, desc)) {
            return &c;
        }
    }
    return nullptr;
}

std::string ClusterCatalog::render_block() const {
    std::string out;
    for (const Cluster& c : clusters_) {
        if (!out.empty()) {
            out += "\n";
        }
        out += fmt::format("{}: {}", c.id, c.description);
    }
    return out;
}

namespace {

struct TagRef {
    bool creates = false;
    std::string content;
};

/// Splits a judge response into per-feedback sections (lines opening with
/// "#Feedback") and collects the cluster tags inside each.
std::vector<std::vector<TagRef>> parse_judge_sections(const std::string& response) {
    std::vector<std::string> sections;
    std::size_t line_start = 0;
    std::size_t current = std::string::npos;
    auto close_section = [&](std::size_t end) {
        if (current != std::string::npos) {
            sections.push_back(response.substr(current, end - current));
        }
    };
    while (line_start <= response.size()) {
        std::size_t line_end = response.find('\n', line_start);
        if (line_end == std::string::npos) {
            line_end = response.size();
        }
        const std::string_view line =
            trim(std::string_view(response).substr(line_start, line_end - line_start));
        if (line.rfind("#Feedback", 0) == 0) {
            close_section(line_start);
            current = line_start;
        }
        if (line_end == response.size()) {
            break;
        }
        line_start = line_end + 1;
    }
    close_section(response.size());

    std::vector<std::vector<TagRef>> out;
    for (const std::string& section : sections) {
        std::vector<TagRef> tags;
        for (const auto& inner : extract_wrapped(section, "<New Cluster>", "</New Cluster>")) {
            tags.push_back(TagRef{true, inner});
        }
        // "<Cluster>" spans; skip the "<New Cluster>" regions so the two tag
        // kinds don't shadow each other
        const std::string without_new =
            strip_wrapped(section, "<New Cluster>", "</New Cluster>");
        for (const auto& inner : extract_wrapped(without_new, "<Cluster>", "</Cluster>")) {
            tags.push_back(TagRef{false, inner});
        }
        out.push_back(std::move(tags));
    }
    return out;
}

std::vector<Feedback> interleave_by_source(const std::vector<Feedback>& feedbacks) {
    std::map<std::string, std::vector<const Feedback*>> by_source;
    for (const Feedback& f : feedbacks) {
        by_source[f.source].push_back(&f);
    }
    std::vector<Feedback> out;
    out.reserve(feedbacks.size());
    for (std::size_t round = 0; out.size() < feedbacks.size(); ++round) {
        for (const auto& [_, list] : by_source) {
            if (round < list.size()) {
                out.push_back(*list[round]);
            }
        }
    }
    return out;
}

std::string render_batch(const std::vector<Feedback>& batch) {
    std::string out;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i > 0) {
            out += "\n\n";
        }
        out += fmt::format("Feedback {}\n{}", i + 1, batch[i].text);
    }
    return out;
}

}  // namespace

ClusterRun cluster_feedbacks(const std::vector<Feedback>& feedbacks, int batch_size,
                             Backend& judge, const TemplateLibrary& templates,
                             ClusterCatalog initial) {
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    ClusterRun result;
    result.catalog = std::move(initial);

    const std::vector<Feedback> stream = interleave_by_source(feedbacks);
    const MetaTemplate& tmpl = templates.get("cluster_prompt");

    for (std::size_t start = 0; start < stream.size(); start += batch_size) {
        const std::size_t end = std::min(stream.size(), start + batch_size);
        const std::vector<Feedback> batch(stream.begin() + start, stream.begin() + end);

        std::vector<std::vector<TagRef>> sections;
        bool well_formed = false;
        for (int attempt = 0; attempt < 2 && !well_formed; ++attempt) {
            const std::string user =
                render(tmpl, {{"clusters", result.catalog.render_block()},
                              {"feedbacks", render_batch(batch)}});
            const std::string response = judge.complete(judge.request(user)).text;
            ++result.judge_calls;
            sections = parse_judge_sections(response);
            well_formed = sections.size() == batch.size() &&
                          std::all_of(sections.begin(), sections.end(),
                                      [](const auto& tags) { return tags.size() == 1; });
        }

        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (i >= sections.size() || sections[i].size() != 1) {
                result.unassigned.push_back(batch[i].id);
                continue;
            }
            const TagRef& tag = sections[i].front();
            std::string cluster_id;
            if (tag.creates) {
                cluster_id = result.catalog.add(tag.content);
            } else if (const Cluster* c = result.catalog.find(tag.content)) {
                cluster_id = c->id;
            } else {
                cluster_id = result.catalog.add(tag.content);  // unknown name: new
            }
            result.assignments.push_back(
                Assignment{batch[i].id, cluster_id, batch[i].source});
        }
    }
    return result;
}

std::vector<DistributionRow> distribution(const std::vector<Assignment>& assignments,
                                          const ClusterCatalog& catalog) {
    if (assignments.empty()) {
        throw Error("distribution over zero assignments");
    }
    std::map<std::string, std::map<std::string, int>> counts;  // source -> cluster -> n
    std::map<std::string, std::set<std::string>> cluster_sources;
    for (const Assignment& a : assignments) {
        ++counts[a.source][a.cluster_id];
        cluster_sources[a.cluster_id].insert(a.source);
    }
    const bool fold = counts.size() >= 2;

    std::vector<DistributionRow> rows;
    for (const auto& [source, per_cluster] : counts) {
        int total = 0;
        for (const auto& [_, n] : per_cluster) {
            total += n;
        }
        int specific = 0;
        for (const Cluster& c : catalog.clusters()) {
            auto it = per_cluster.find(c.id);
            if (it == per_cluster.end()) {
                continue;
            }
            if (fold && cluster_sources[c.id].size() == 1) {
                specific += it->second;
            } else {
                rows.push_back(DistributionRow{
                    source, c.id, static_cast<double>(it->second) / total});
            }
        }
        if (specific > 0) {
            rows.push_back(DistributionRow{source, "Specific",
                                           static_cast<double>(specific) / total});
        }
    }
    return rows;
}

std::optional<double> asrr(const RunTrace& trace,
                           const std::vector<Assignment>& assignments, int step) {
    if (step < 1) {
        throw Error("step repetition is defined from step 1 on");
    }
    std::map<std::string, std::string> cluster_of;
    for (const Assignment& a : assignments) {
        cluster_of[a.feedback_id] = a.cluster_id;
    }
    std::map<std::string, const Prompt*> prompts;
    std::vector<const Feedback*> all_feedbacks;
    for (const StepRecord& rec : trace.steps) {
        for (const Prompt& p : rec.candidates) {
            prompts.emplace(p.id, &p);
        }
        for (const Feedback& f : rec.feedbacks) {
            all_feedbacks.push_back(&f);
        }
    }

    auto lineage_of = [&](const std::string& prompt_id) {
        std::set<std::string> chain;
        std::string current = prompt_id;
        while (!current.empty() && chain.insert(current).second) {
            auto it = prompts.find(current);
            if (it == prompts.end() || !it->second->parent_id) {
                break;
            }
            current = *it->second->parent_id;
        }
        return chain;
    };

    int repeated = 0;
    int total = 0;
    for (const Feedback* f : all_feedbacks) {
        if (f->step != step) {
            continue;
        }
        ++total;
        auto self = cluster_of.find(f->id);
        if (self == cluster_of.end()) {
            throw Error(fmt::format("feedback {} at step {} has no cluster assignment",
                                    f->id, step));
        }
        const std::set<std::string> lineage = lineage_of(f->prompt_id);
        bool repeat = false;
        for (const Feedback* g : all_feedbacks) {
            if (g->step >= step || !lineage.count(g->prompt_id)) {
                continue;
            }
            auto other = cluster_of.find(g->id);
            if (other != cluster_of.end() && other->second == self->second) {
                repeat = true;
                break;
            }
        }
        repeated += repeat ? 1 : 0;
    }
    if (total == 0) {
        return std::nullopt;
    }
    return static_cast<double>(repeated) / static_cast<double>(total);
}

}  // namespace promptopt
