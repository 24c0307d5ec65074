#include "ehfl/task_io.hpp"

#include <fstream>

#include "ehfl/errors.hpp"

namespace ehfl {
namespace {

nlohmann::json matrix_rows(const RowMatrix& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.cols());
        for (Eigen::Index k = 0; k < m.cols(); ++k) row[k] = m(i, k);
        rows.push_back(row);
    }
    return rows;
}

RowMatrix rows_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols) {
    if (!j.is_array() || j.size() != rows) throw InvalidShape("matrix row count mismatch");
    RowMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto row = j[i].get<std::vector<double>>();
        if (row.size() != cols) throw InvalidShape("matrix column count mismatch");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = row[k];
    }
    return m;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

nlohmann::json task_summary_json(const Task& task) {
    nlohmann::json j;
    j["kind"] = task.kind();
    j["samples"] = task.num_samples();
    j["dim"] = task.dimension();
    j["clients"] = task.num_clients();
    j["smoothness"] = task.smoothness();
    j["f_star"] = task.optimal_value();
    j["x_star"] = to_std(task.minimizer());
    if (const auto* l = dynamic_cast<const LogisticTask*>(&task)) j["mu"] = l->regularization();
    return j;
}

nlohmann::json task_to_json(const Task& task) {
    nlohmann::json j = task_summary_json(task);
    j["format"] = "ehfl-task";
    j["version"] = 1;
    j["partition"] = task.partition();
    if (const auto* q = dynamic_cast<const QuadraticTask*>(&task)) {
        j["design"] = matrix_rows(q->design());
        j["targets"] = to_std(q->targets());
    } else if (const auto* l = dynamic_cast<const LogisticTask*>(&task)) {
        j["features"] = matrix_rows(l->features());
        j["labels"] = to_std(l->labels());
        j["mu"] = l->regularization();
    } else {
        throw InvalidArgument("unsupported task type for serialization");
    }
    return j;
}

std::unique_ptr<Task> task_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "ehfl-task") throw InvalidShape("not a task artifact");
        const auto n = j.at("samples").get<std::size_t>();
        const auto d = j.at("dim").get<std::size_t>();
        auto partition = j.at("partition").get<Partition>();
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "quadratic") {
            return std::make_unique<QuadraticTask>(rows_matrix(j.at("design"), n, d),
                                                   to_eigen(j.at("targets").get<std::vector<double>>()),
                                                   std::move(partition), j.at("smoothness").get<double>());
        }
        if (kind == "logistic") {
            return std::make_unique<LogisticTask>(rows_matrix(j.at("features"), n, d),
                                                  to_eigen(j.at("labels").get<std::vector<double>>()),
                                                  j.at("mu").get<double>(), std::move(partition),
                                                  to_eigen(j.at("x_star").get<std::vector<double>>()));
        }
        throw InvalidShape("unknown task kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw InvalidShape(std::string("malformed task artifact: ") + e.what());
    }
}

void save_task(const std::string& path, const Task& task) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write task artifact '" + path + "'");
    out << task_to_json(task).dump() << "\n";
}

std::unique_ptr<Task> load_task(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read task artifact '" + path + "'");
    return task_from_json(nlohmann::json::parse(in));
}

}  // namespace ehfl
