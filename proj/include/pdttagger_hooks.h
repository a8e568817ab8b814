/* Region hooks called from instrumented C sources. Link with pdttagger_rt. */
#ifndef PDTTAGGER_HOOKS_H
#define PDTTAGGER_HOOKS_H

#ifdef __cplusplus
extern "C" {
#endif

void pdt_region_begin(int region_id);
void pdt_region_end(int region_id);

/* Thread count for the region's team. Never returns less than 1. */
int pdt_region_threads(int region_id);

/* Writes the result files now. Also registered with atexit on first use. */
void pdt_finalize(void);

#ifdef __cplusplus
}
#endif

#endif /* PDTTAGGER_HOOKS_H */
