package asm

// abs is implemented in assembly.
func abs(x int64) int64

//go:noescape
func memmove(to, from uintptr, n uintptr)

func Abs(x int64) int64 {
	return abs(x)
}

//go:linkname nanotime runtime.nanotime
func nanotime() int64
