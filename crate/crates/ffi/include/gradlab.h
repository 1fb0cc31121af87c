#ifndef GRADLAB_H
#define GRADLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  /**
   * Bad domain, resolution, field or configuration.
   */
  GL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Iteration failed to converge or a system was singular.
   */
  GL_STATUS_NUMERICAL = 3,
  GL_STATUS_BUFFER_TOO_SMALL = 4,
  GL_STATUS_IO = 5,
  GL_STATUS_PANIC = 6,
} GlStatus;

typedef struct GlBranch GlBranch;

typedef struct GlGrid GlGrid;

typedef struct GlProblem GlProblem;

typedef struct GlSolution GlSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next
 * failing call. Never null.
 */
const char *gl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gl_version(void);

/**
 * Uniform grid with `resolution` nodes on `[a, b]`.
 */
enum GlStatus gl_grid_new_interval(double a, double b, size_t resolution, struct GlGrid **out);

/**
 * Uniform grid with `resolution` nodes per axis on `[ax, bx] × [ay, by]`.
 */
enum GlStatus gl_grid_new_rectangle(double ax,
                                    double bx,
                                    double ay,
                                    double by,
                                    size_t resolution,
                                    struct GlGrid **out);

/**
 * Number of nodes, boundary included; 0 for a null handle.
 */
size_t gl_grid_len(const struct GlGrid *grid);

/**
 * Copies the node coordinates (`dim` per node, interleaved) into `buf`.
 */
enum GlStatus gl_grid_coordinates(const struct GlGrid *grid, double *buf, size_t len);

void gl_grid_free(struct GlGrid *grid);

/**
 * Problem with constant coefficients on a copy of `grid`.
 */
enum GlStatus gl_problem_new_constant(const struct GlGrid *grid,
                                      double mu,
                                      double c,
                                      double h,
                                      struct GlProblem **out);

/**
 * Problem with nodal coefficient values; each array holds `len` values,
 * one per grid node.
 */
enum GlStatus gl_problem_new_nodal(const struct GlGrid *grid,
                                   const double *mu,
                                   const double *c,
                                   const double *h,
                                   size_t len,
                                   struct GlProblem **out);

/**
 * Problem described by an experiment file in TOML (NUL-terminated text).
 */
enum GlStatus gl_problem_from_toml(const char *text, struct GlProblem **out);

/**
 * Nodes of the problem's grid; 0 for a null handle.
 */
size_t gl_problem_len(const struct GlProblem *problem);

void gl_problem_free(struct GlProblem *problem);

/**
 * Principal weighted eigenvalue `γ₁` of the problem's `c`.
 */
enum GlStatus gl_problem_gamma1(const struct GlProblem *problem, double *out);

/**
 * Damped Newton at `lambda`. `initial` may be null (start from zero) or
 * point to one value per node. A state that fails to converge is still
 * returned in `out`, together with `GL_STATUS_NUMERICAL`.
 */
enum GlStatus gl_solve(const struct GlProblem *problem,
                       double lambda,
                       double tol,
                       size_t max_iters,
                       const double *initial,
                       struct GlSolution **out);

double gl_solution_lambda(const struct GlSolution *s);

double gl_solution_sup_norm(const struct GlSolution *s);

double gl_solution_residual(const struct GlSolution *s);

/**
 * 1 when converged, 0 otherwise (or for a null handle).
 */
int32_t gl_solution_converged(const struct GlSolution *s);

/**
 * 1 when every nodal value is nonnegative up to rounding.
 */
int32_t gl_solution_nonneg(const struct GlSolution *s);

/**
 * Copies the nodal values into `buf` (at least one slot per node).
 */
enum GlStatus gl_solution_values(const struct GlSolution *s, double *buf, size_t len);

void gl_solution_free(struct GlSolution *s);

/**
 * Continuation from the Newton solution at `lambda0`, towards larger `λ`
 * first. Non-positive `ds_max`, `norm_cap` or `max_points` keep defaults.
 */
enum GlStatus gl_trace_branch(const struct GlProblem *problem,
                              double lambda0,
                              double ds_max,
                              double norm_cap,
                              size_t max_points,
                              struct GlBranch **out);

size_t gl_branch_len(const struct GlBranch *b);

/**
 * Point `index` of the branch; every output pointer may be null.
 */
enum GlStatus gl_branch_point(const struct GlBranch *b,
                              size_t index,
                              double *s,
                              double *lambda,
                              double *sup_norm,
                              int32_t *fold);

size_t gl_branch_fold_count(const struct GlBranch *b);

/**
 * `λ` of the `index`-th turning point.
 */
enum GlStatus gl_branch_fold_lambda(const struct GlBranch *b, size_t index, double *out);

void gl_branch_free(struct GlBranch *b);

/**
 * Parameters `(ε_j, A_j, λ_j)` of member `j ≥ 1` of the exact family on
 * `(0, 3)`.
 */
enum GlStatus gl_exact_member(uint32_t j, double *eps, double *amp, double *lambda);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRADLAB_H */
