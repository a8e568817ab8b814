#include "pdttagger_hooks.h" /*@pdttagger@*/
/* Blocked LU factorisation over a sparse block matrix (toy scale). */
#include <stdio.h>
#include <stdlib.h>

#define NB 8
#define BS 8

static double *blocks[NB][NB];

static void genmat(void)
{
    for (int ii = 0; ii < NB; ii++)
        for (int jj = 0; jj < NB; jj++) {
            int present = (ii == jj) || ((ii + jj) % 3 == 0);
            blocks[ii][jj] = present ? malloc(BS * BS * sizeof(double)) : NULL;
            if (!present) continue;
            for (int i = 0; i < BS; i++)
                for (int j = 0; j < BS; j++)
                    blocks[ii][jj][i * BS + j] = (i == j ? 4.0 * BS : 0.0) + 1.0 / (1 + i + j + ii + jj);
        }
}

static void lu0(double *diag)
{
    for (int k = 0; k < BS; k++)
        for (int i = k + 1; i < BS; i++) {
            diag[i * BS + k] /= diag[k * BS + k];
            for (int j = k + 1; j < BS; j++)
                diag[i * BS + j] -= diag[i * BS + k] * diag[k * BS + j];
        }
}

static void fwd(const double *diag, double *col)
{
    for (int k = 0; k < BS; k++)
        for (int i = k + 1; i < BS; i++)
            for (int j = 0; j < BS; j++)
                col[i * BS + j] -= diag[i * BS + k] * col[k * BS + j];
}

static void bdiv(const double *diag, double *row)
{
    for (int i = 0; i < BS; i++)
        for (int k = 0; k < BS; k++) {
            row[i * BS + k] /= diag[k * BS + k];
            for (int j = k + 1; j < BS; j++)
                row[i * BS + j] -= row[i * BS + k] * diag[k * BS + j];
        }
}

static void bmod(const double *row, const double *col, double *inner)
{
    for (int i = 0; i < BS; i++)
        for (int j = 0; j < BS; j++)
            for (int k = 0; k < BS; k++)
                inner[i * BS + j] -= row[i * BS + k] * col[k * BS + j];
}

static void sparselu(void)
{
    for (int kk = 0; kk < NB; kk++) {
        lu0(blocks[kk][kk]);
pdt_region_begin(0); /*@pdttagger@*/
#pragma omp parallel for schedule(static) num_threads(pdt_region_threads(0)) /*@pdttagger@*/
        for (int jj = kk + 1; jj < NB; jj++)
            if (blocks[kk][jj] != NULL) fwd(blocks[kk][kk], blocks[kk][jj]);
pdt_region_end(0); /*@pdttagger@*/

pdt_region_begin(1); /*@pdttagger@*/
#pragma omp parallel for \
        schedule(dynamic) num_threads(pdt_region_threads(1)) /*@pdttagger@*/
        for (int ii = kk + 1; ii < NB; ii++) {
            if (blocks[ii][kk] == NULL) continue;
            bdiv(blocks[kk][kk], blocks[ii][kk]);
            for (int jj = kk + 1; jj < NB; jj++) {
                if (blocks[kk][jj] == NULL) continue;
                if (blocks[ii][jj] == NULL) {
                    blocks[ii][jj] = calloc(BS * BS, sizeof(double));
                }
                bmod(blocks[ii][kk], blocks[kk][jj], blocks[ii][jj]);
            }
        }
pdt_region_end(1); /*@pdttagger@*/
    }
}

int main(void)
{
    genmat();
    sparselu();
    double sum = 0;
    /* orphaned single: binds to the implicit team */
pdt_region_begin(2); /*@pdttagger@*/
#pragma omp single
    {
        for (int ii = 0; ii < NB; ii++)
            for (int jj = 0; jj < NB; jj++)
                if (blocks[ii][jj] != NULL)
                    for (int i = 0; i < BS * BS; i++) sum += blocks[ii][jj][i];
    }
pdt_region_end(2); /*@pdttagger@*/
    printf("sparselu checksum %.6f\n", sum);
    return 0;
}
