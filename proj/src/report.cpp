#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "agenteval/csv.hpp"
#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/pipeline.hpp"
#include "agenteval/stats.hpp"

namespace agenteval {

namespace {

std::string fmt_f(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string sanitize_filename(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') out += c;
        else out += '_';
    }
    return out;
}

// dimension -> article -> rater -> score
using Index = std::map<Dimension, std::map<std::string, std::map<std::string, double>>>;

struct RatingsFile {
    std::string label;
    std::vector<RatingRecord> records;
    Index index;
    std::set<std::string> raters;
    std::set<std::string> articles;
};

RatingsFile load_indexed(const std::string& label, const std::filesystem::path& path) {
    RatingsFile f;
    f.label = label;
    f.records = load_ratings(path);
    for (const auto& r : f.records) {
        f.index[r.dimension][r.article_id][r.rater_id] = r.score.value();
        f.raters.insert(r.rater_id);
        f.articles.insert(r.article_id);
    }
    return f;
}

// mean score per article over raters, for one dimension
std::map<std::string, double> article_means(const RatingsFile& f, Dimension d) {
    std::map<std::string, double> out;
    auto it = f.index.find(d);
    if (it == f.index.end()) return out;
    for (const auto& [article, by_rater] : it->second) {
        double sum = 0.0;
        for (const auto& [_, score] : by_rater) sum += score;
        out[article] = sum / static_cast<double>(by_rater.size());
    }
    return out;
}

std::vector<double> pooled_scores(const RatingsFile& f, Dimension d,
                                  const std::set<std::string>& articles) {
    std::vector<double> out;
    auto it = f.index.find(d);
    if (it == f.index.end()) return out;
    for (const auto& [article, by_rater] : it->second) {
        if (!articles.count(article)) continue;
        for (const auto& [_, score] : by_rater) out.push_back(score);
    }
    return out;
}

// per (rater, article) mean over dimensions, restricted to the given articles
std::vector<double> per_pair_dimension_means(const RatingsFile& f,
                                             const std::set<std::string>& articles) {
    std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
    for (const auto& r : f.records) {
        if (!articles.count(r.article_id)) continue;
        auto& slot = acc[{r.rater_id, r.article_id}];
        slot.first += r.score.value();
        slot.second += 1;
    }
    std::vector<double> out;
    out.reserve(acc.size());
    for (const auto& [_, sum_count] : acc) {
        out.push_back(sum_count.first / static_cast<double>(sum_count.second));
    }
    return out;
}

} // namespace

AnalyzeResult run_analyze(const AnalyzeOptions& options) {
    std::filesystem::create_directories(options.out_dir);

    RatingsFile human = load_indexed("human", options.human_ratings);
    RatingsFile agent = load_indexed("AgentEval", options.agent_ratings);
    std::vector<RatingsFile> candidates;
    for (const auto& [label, path] : options.candidates) {
        candidates.push_back(load_indexed(label, path));
    }

    // overlapping coverage: articles rated by both sides in some dimension
    std::set<std::string> common_articles;
    for (const auto& a : human.articles) {
        if (agent.articles.count(a)) common_articles.insert(a);
    }
    bool any_dim_overlap = false;
    for (Dimension d : kAllDimensions) {
        auto hm = article_means(human, d);
        auto am = article_means(agent, d);
        for (const auto& [article, _] : hm) {
            if (am.count(article)) { any_dim_overlap = true; break; }
        }
        if (any_dim_overlap) break;
    }
    if (common_articles.empty() || !any_dim_overlap) {
        throw Error(ErrorKind::analysis,
                    "no overlapping (article, dimension) coverage between the human and "
                    "agent ratings");
    }

    std::vector<std::string> notes;
    AnalyzeResult result;

    // --- anova.csv: two groups per metric, agent scores vs human scores -------
    {
        std::vector<std::vector<std::string>> rows;
        auto add_row = [&](const std::string& metric, const std::vector<double>& agent_scores,
                           const std::vector<double>& human_scores) {
            if (agent_scores.size() < 2 || human_scores.size() < 2) {
                rows.push_back({metric, "", "", "", "", "", ""});
                notes.push_back("ANOVA for " + metric +
                                " skipped: fewer than 2 scores in a group.");
                return;
            }
            std::vector<std::vector<double>> groups = {agent_scores, human_scores};
            auto r = stats::anova_one_way(groups);
            rows.push_back({metric, fmt_g(r.ss_between), fmt_g(r.ss_within),
                            fmt_g(r.ms_between), fmt_g(r.ms_within), fmt_g(r.f_value),
                            fmt_g(r.p_value)});
            if (r.degenerate) {
                notes.push_back("ANOVA for " + metric +
                                " is degenerate (zero within-group variance).");
            }
        };
        for (Dimension d : kAllDimensions) {
            add_row(std::string(to_string(d)), pooled_scores(agent, d, common_articles),
                    pooled_scores(human, d, common_articles));
        }
        // Average row: separate test on per-(rater, article) scores averaged
        // over dimensions; the convention is restated in summary.md.
        add_row("Average", per_pair_dimension_means(agent, common_articles),
                per_pair_dimension_means(human, common_articles));
        write_csv(options.out_dir / "anova.csv",
                  {"metric", "ss_between", "ss_error", "ms_between", "ms_error", "f_value",
                   "p_value"},
                  rows);
        result.written.push_back(options.out_dir / "anova.csv");
    }

    // --- errors.csv: each framework against the human per-article mean --------
    {
        std::vector<std::vector<std::string>> rows;
        std::vector<const RatingsFile*> frameworks = {&agent};
        for (const auto& c : candidates) frameworks.push_back(&c);
        for (Dimension d : kAllDimensions) {
            auto hm = article_means(human, d);
            for (const auto* fw : frameworks) {
                auto fm = article_means(*fw, d);
                std::vector<double> h, c;
                for (const auto& [article, mean] : hm) {
                    auto it = fm.find(article);
                    if (it == fm.end()) continue;
                    h.push_back(mean);
                    c.push_back(it->second);
                }
                if (h.empty()) {
                    notes.push_back("No overlapping articles for " + fw->label + " on " +
                                    std::string(to_string(d)) + "; error row skipped.");
                    continue;
                }
                rows.push_back({std::string(to_string(d)), fw->label,
                                fmt_f(stats::rmse(h, c)), fmt_f(stats::mae(h, c))});
            }
        }
        write_csv(options.out_dir / "errors.csv", {"attribute", "framework", "rmse", "mae"},
                  rows);
        result.written.push_back(options.out_dir / "errors.csv");
    }

    // --- pearson.csv: per-agent r paired by rater id, Fisher-aggregated -------
    {
        std::set<std::string> paired;
        for (const auto& r : human.raters) {
            if (agent.raters.count(r)) paired.insert(r);
        }
        if (paired.empty()) {
            throw Error(ErrorKind::analysis,
                        "pearson pairing failed: no rater_id appears in both the human and "
                        "agent ratings");
        }
        for (const auto& r : human.raters) {
            if (!paired.count(r)) notes.push_back("human rater '" + r + "' has no agent pair.");
        }
        for (const auto& r : agent.raters) {
            if (!paired.count(r)) notes.push_back("agent rater '" + r + "' has no human pair.");
        }

        std::vector<std::vector<std::string>> rows;
        for (Dimension d : kAllDimensions) {
            std::vector<double> rs;
            int degenerate = 0;
            for (const auto& rater : paired) {
                std::vector<double> x, y;
                auto hit = human.index.find(d);
                auto ait = agent.index.find(d);
                if (hit == human.index.end() || ait == agent.index.end()) continue;
                for (const auto& [article, by_rater] : hit->second) {
                    auto h = by_rater.find(rater);
                    if (h == by_rater.end()) continue;
                    auto arow = ait->second.find(article);
                    if (arow == ait->second.end()) continue;
                    auto a = arow->second.find(rater);
                    if (a == arow->second.end()) continue;
                    x.push_back(a->second); // agent
                    y.push_back(h->second); // human
                }
                if (x.size() < 2) { ++degenerate; continue; }
                try {
                    double r = stats::pearson(x, y).r;
                    if (std::abs(r) >= 1.0) { ++degenerate; continue; }
                    rs.push_back(r);
                } catch (const Error&) {
                    ++degenerate;
                }
            }
            if (degenerate > 0) {
                notes.push_back(std::string(to_string(d)) + ": " + std::to_string(degenerate) +
                                " rater pair(s) excluded from the Pearson aggregate "
                                "(insufficient overlap, zero variance, or |r| = 1).");
            }
            if (rs.size() >= 2) {
                auto ci = stats::aggregate_pearson_ci(rs);
                rows.push_back({std::string(to_string(d)), fmt_f(ci.mean_r),
                                fmt_f(ci.half_width)});
            } else {
                rows.push_back({std::string(to_string(d)), "", ""});
                notes.push_back(std::string(to_string(d)) +
                                ": fewer than 2 usable correlations; CI cell left empty.");
            }
        }
        write_csv(options.out_dir / "pearson.csv", {"metric", "mean_r", "ci_half_width"},
                  rows);
        result.written.push_back(options.out_dir / "pearson.csv");
    }

    // --- weights_*.csv + position-wise trait alignment -------------------------
    std::map<Dimension, std::pair<int, bool>> alignment; // matches, available
    if (options.participants) {
        auto profiles = load_participants(*options.participants);
        std::map<std::string, const PersonaProfile*> by_name;
        for (const auto& p : profiles) by_name[p.name] = &p;

        auto weights_for = [&](const RatingsFile& file, Dimension d)
            -> std::optional<stats::FeatureWeights> {
            std::vector<PersonaProfile> matched;
            std::vector<double> targets;
            for (const auto& rater : file.raters) {
                auto it = by_name.find(rater);
                if (it == by_name.end()) continue;
                double sum = 0.0;
                int n = 0;
                auto dit = file.index.find(d);
                if (dit == file.index.end()) continue;
                for (const auto& [_, by_rater] : dit->second) {
                    auto s = by_rater.find(rater);
                    if (s != by_rater.end()) { sum += s->second; ++n; }
                }
                if (n == 0) continue;
                matched.push_back(*it->second);
                targets.push_back(sum / n);
            }
            if (matched.size() < 2) return std::nullopt;
            return stats::feature_importance(matched, targets, d);
        };

        for (Dimension d : kAllDimensions) {
            auto hw = weights_for(human, d);
            auto aw = weights_for(agent, d);
            for (const auto& [group, w] :
                 std::initializer_list<std::pair<const char*, const std::optional<stats::FeatureWeights>*>>{
                     {"human", &hw}, {"agent", &aw}}) {
                if (!*w) {
                    notes.push_back("weights_" + std::string(to_string(d)) + "_" + group +
                                    " skipped: fewer than 2 raters with matching profiles.");
                    continue;
                }
                std::vector<std::vector<std::string>> rows;
                for (const auto& feature : (*w)->ranking) {
                    rows.push_back({feature, fmt_f((*w)->weights.at(feature))});
                }
                std::string name = "weights_" + sanitize_filename(to_string(d)) + "_" +
                                   group + ".csv";
                write_csv(options.out_dir / name, {"feature", "weight"}, rows);
                result.written.push_back(options.out_dir / name);
            }
            if (hw && aw) {
                auto traits_only = [](const stats::FeatureWeights& w) {
                    std::vector<std::string> out;
                    for (const auto& f : w.ranking) {
                        if (f.rfind("trait:", 0) == 0) out.push_back(f);
                    }
                    return out;
                };
                auto ht = traits_only(*hw);
                auto at = traits_only(*aw);
                int k = static_cast<int>(std::min<std::size_t>({5, ht.size(), at.size()}));
                alignment[d] = {stats::positional_alignment(ht, at, k), true};
            } else {
                alignment[d] = {0, false};
            }
        }
    }

    // --- averages_<generator>.csv ----------------------------------------------
    std::map<std::string, std::vector<std::vector<std::string>>> averages;
    if (options.articles) {
        auto articles = load_articles(*options.articles);
        std::map<std::string, std::set<std::string>> by_generator;
        for (const auto& a : articles) by_generator[a.generator].insert(a.id);
        for (const auto& [generator, ids] : by_generator) {
            std::vector<std::vector<std::string>> rows;
            for (Dimension d : kAllDimensions) {
                auto mean_over = [&](const RatingsFile& f) -> std::optional<double> {
                    auto scores = pooled_scores(f, d, ids);
                    if (scores.empty()) return std::nullopt;
                    double sum = 0.0;
                    for (double s : scores) sum += s;
                    return sum / static_cast<double>(scores.size());
                };
                auto hm = mean_over(human);
                auto am = mean_over(agent);
                rows.push_back({std::string(to_string(d)), hm ? fmt_f(*hm) : "",
                                am ? fmt_f(*am) : ""});
            }
            std::string name = "averages_" + sanitize_filename(generator) + ".csv";
            write_csv(options.out_dir / name, {"dimension", "human_mean", "agent_mean"}, rows);
            result.written.push_back(options.out_dir / name);
            averages[generator] = rows;
        }
    }

    // --- summary.md -------------------------------------------------------------
    {
        std::ofstream md(options.out_dir / "summary.md", std::ios::binary);
        if (!md) throw Error(ErrorKind::io, "cannot write summary.md");
        md << "# Analysis summary\n\n";
        md << "Inputs: " << common_articles.size() << " articles with overlapping coverage, "
           << human.raters.size() << " human raters, " << agent.raters.size()
           << " agent raters.\n\n";
        md << "## Conventions\n\n";
        md << "- ANOVA compares two groups per metric: all agent scores vs all human "
              "scores, pooled over articles and raters. The Average row runs the same "
              "test on per-(rater, article) scores averaged over dimensions.\n";
        md << "- Pearson r is computed per rater pair (matched by rater id) and "
              "aggregated with the Fisher z transform; the interval is the 95% normal "
              "approximation of the mean z, back-transformed (1.96 sd/sqrt(n)).\n";
        md << "- Feature weights are the minimum-norm least-squares fit of each rater's "
              "mean rating against age, experience and one-hot job/trait columns; rank "
              "ties break lexicographically by feature name.\n\n";
        if (!alignment.empty()) {
            md << "## Position-wise trait alignment (top 5, human vs agent)\n\n";
            md << "| dimension | matches |\n|---|---|\n";
            for (Dimension d : kAllDimensions) {
                auto it = alignment.find(d);
                if (it == alignment.end()) continue;
                md << "| " << to_string(d) << " | "
                   << (it->second.second ? std::to_string(it->second.first) : "n/a")
                   << " |\n";
            }
            md << '\n';
        }
        if (!averages.empty()) {
            md << "## Average rating by generator\n\n";
            for (const auto& [generator, rows] : averages) {
                md << "### " << generator << "\n\n| dimension | human | agent |\n|---|---|---|\n";
                for (const auto& row : rows) {
                    md << "| " << row[0] << " | " << row[1] << " | " << row[2] << " |\n";
                }
                md << '\n';
            }
        }
        if (!notes.empty()) {
            md << "## Notes\n\n";
            for (const auto& note : notes) md << "- " << note << '\n';
        }
        result.written.push_back(options.out_dir / "summary.md");
    }

    RunManifest manifest;
    manifest.command = "analyze";
    manifest.created_utc = utc_timestamp();
    manifest.add_input(options.human_ratings);
    manifest.add_input(options.agent_ratings);
    for (const auto& [_, path] : options.candidates) manifest.add_input(path);
    if (options.articles) manifest.add_input(*options.articles);
    if (options.participants) manifest.add_input(*options.participants);
    nlohmann::json config;
    config["candidates"] = nlohmann::json::array();
    for (const auto& [label, _] : options.candidates) config["candidates"].push_back(label);
    manifest.set_config(config);
    for (const auto& path : result.written) {
        manifest.add_output(options.out_dir, path.filename().string());
    }
    manifest.run_id = derive_run_id(manifest);
    manifest.save(options.out_dir / "manifest.json");
    result.manifest = manifest;
    return result;
}

// --- report: markdown + SVG from an analyze directory -------------------------

namespace {

// minimal radar chart: one pentagon axis per dimension, one polygon per group
std::string radar_svg(const std::string& title,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      const std::vector<std::string>& axes) {
    const double cx = 200, cy = 210, radius = 140, vmax = 5.0;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"430\">\n";
    svg += "<text x=\"200\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title +
           "</text>\n";
    auto point = [&](std::size_t axis, double value) {
        const double angle = -M_PI / 2 + 2 * M_PI * axis / axes.size();
        const double r = radius * value / vmax;
        return std::make_pair(cx + r * std::cos(angle), cy + r * std::sin(angle));
    };
    for (int ring = 1; ring <= 5; ++ring) {
        svg += "<polygon fill=\"none\" stroke=\"#ccc\" points=\"";
        for (std::size_t i = 0; i < axes.size(); ++i) {
            auto [x, y] = point(i, ring);
            svg += fmt_g(x) + "," + fmt_g(y) + " ";
        }
        svg += "\"/>\n";
    }
    for (std::size_t i = 0; i < axes.size(); ++i) {
        auto [x, y] = point(i, 5.3);
        svg += "<text x=\"" + fmt_g(x) + "\" y=\"" + fmt_g(y) +
               "\" text-anchor=\"middle\" font-size=\"12\">" + axes[i] + "</text>\n";
    }
    std::size_t color = 0;
    double legend_y = 400;
    for (const auto& [label, values] : series) {
        svg += "<polygon fill=\"none\" stroke-width=\"2\" stroke=\"";
        svg += colors[color % 4];
        svg += "\" points=\"";
        for (std::size_t i = 0; i < values.size(); ++i) {
            auto [x, y] = point(i, values[i]);
            svg += fmt_g(x) + "," + fmt_g(y) + " ";
        }
        svg += "\"/>\n";
        svg += "<rect x=\"30\" y=\"" + fmt_g(legend_y - 10) +
               "\" width=\"12\" height=\"12\" fill=\"" + colors[color % 4] + "\"/>";
        svg += "<text x=\"48\" y=\"" + fmt_g(legend_y) + "\" font-size=\"12\">" + label +
               "</text>\n";
        legend_y += 16;
        ++color;
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace

ReportResult run_report(const ReportOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    ReportResult result;

    std::ofstream md(options.out_dir / "report.md", std::ios::binary);
    if (!md) throw Error(ErrorKind::io, "cannot write report.md");
    md << "# Evaluation report\n\n";

    auto emit_table = [&](const std::filesystem::path& csv, const std::string& heading) {
        if (!std::filesystem::exists(csv)) return;
        CsvTable table = read_csv(csv);
        md << "## " << heading << "\n\n|";
        for (const auto& h : table.header) md << " " << h << " |";
        md << "\n|";
        for (std::size_t i = 0; i < table.header.size(); ++i) md << "---|";
        md << "\n";
        for (const auto& row : table.rows) {
            md << "|";
            for (const auto& cell : row) md << " " << cell << " |";
            md << "\n";
        }
        md << "\n";
    };
    emit_table(options.analyze_dir / "anova.csv", "ANOVA (agent vs human)");
    emit_table(options.analyze_dir / "errors.csv", "RMSE / MAE vs human mean");
    emit_table(options.analyze_dir / "pearson.csv", "Pearson correlation (95% CI)");
    result.written.push_back(options.out_dir / "report.md");

    // one radar per averages_<generator>.csv
    for (const auto& entry : std::filesystem::directory_iterator(options.analyze_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("averages_", 0) != 0 || entry.path().extension() != ".csv") continue;
        CsvTable table = read_csv(entry.path());
        std::vector<std::string> axes;
        std::vector<double> human, agent;
        bool complete = true;
        for (const auto& row : table.rows) {
            axes.push_back(row[0]);
            if (row[1].empty() || row[2].empty()) { complete = false; break; }
            human.push_back(std::stod(row[1]));
            agent.push_back(std::stod(row[2]));
        }
        if (!complete || axes.empty()) continue;
        const std::string generator =
            name.substr(9, name.size() - 9 - 4); // strip averages_ / .csv
        std::string svg = radar_svg("Average rating: " + generator,
                                    {{"human", human}, {"agent", agent}}, axes);
        auto svg_path = options.out_dir / ("radar_" + generator + ".svg");
        std::ofstream out(svg_path, std::ios::binary);
        out << svg;
        result.written.push_back(svg_path);
        md << "![radar " << generator << "](radar_" << generator << ".svg)\n";
    }
    md.close();

    RunManifest manifest;
    manifest.command = "report";
    manifest.created_utc = utc_timestamp();
    for (const char* name : {"anova.csv", "errors.csv", "pearson.csv"}) {
        if (std::filesystem::exists(options.analyze_dir / name)) {
            manifest.add_input(options.analyze_dir / name);
        }
    }
    nlohmann::json config;
    config["analyze_dir"] = std::filesystem::absolute(options.analyze_dir).string();
    manifest.set_config(config);
    for (const auto& path : result.written) {
        manifest.add_output(options.out_dir, path.filename().string());
    }
    manifest.run_id = derive_run_id(manifest);
    manifest.save(options.out_dir / "manifest.json");
    return result;
}

} // namespace agenteval
