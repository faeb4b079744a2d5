#pragma once

#if defined(__x86_64__) || defined(_M_X64)
#define GMNMT_HAVE_X86 1
#else
#define GMNMT_HAVE_X86 0
#endif

#if defined(__aarch64__) && defined(__ARM_NEON)
#define GMNMT_HAVE_NEON 1
#else
#define GMNMT_HAVE_NEON 0
#endif
