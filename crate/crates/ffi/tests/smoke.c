#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "gradlab.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,    \
                    #cond, gl_last_error());                           \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    GlGrid *grid = NULL;
    CHECK(gl_grid_new_interval(0.0, 1.0, 101, &grid) == GL_STATUS_OK);
    CHECK(gl_grid_len(grid) == 101);

    GlProblem *problem = NULL;
    CHECK(gl_problem_new_constant(grid, 1.0, 1.0, 1.0, &problem) == GL_STATUS_OK);

    double g1 = 0.0;
    CHECK(gl_problem_gamma1(problem, &g1) == GL_STATUS_OK);
    CHECK(fabs(g1 - 9.8688) < 1e-3);

    GlSolution *sol = NULL;
    CHECK(gl_solve(problem, 0.0, 0.0, 0, NULL, &sol) == GL_STATUS_OK);
    CHECK(gl_solution_converged(sol) == 1);
    double *u = malloc(101 * sizeof(double));
    CHECK(gl_solution_values(sol, u, 10) == GL_STATUS_BUFFER_TOO_SMALL);
    CHECK(gl_solution_values(sol, u, 101) == GL_STATUS_OK);
    CHECK(fabs(u[50] - gl_solution_sup_norm(sol)) < 1e-12);
    free(u);

    GlBranch *branch = NULL;
    CHECK(gl_trace_branch(problem, 0.0, 0.0, 0.0, 0, &branch) == GL_STATUS_OK);
    CHECK(gl_branch_fold_count(branch) == 1);
    double fold = 0.0;
    CHECK(gl_branch_fold_lambda(branch, 0, &fold) == GL_STATUS_OK);
    CHECK(fold > 5.6 && fold < 5.8);

    GlGrid *bad = NULL;
    CHECK(gl_grid_new_interval(1.0, 0.0, 101, &bad) == GL_STATUS_INVALID_ARGUMENT);
    CHECK(bad == NULL);

    gl_branch_free(branch);
    gl_solution_free(sol);
    gl_problem_free(problem);
    gl_grid_free(grid);
    printf("ok %s fold %.6f\n", gl_version(), fold);
    return 0;
}
