//go:build linux || darwin

// Package doc has doc comments.
package doc

// Documented does a thing.
//
// It has a long comment with braces { and } and the word func.
func Documented() {}

/*
Block documented.
*/
func BlockDocumented() int {
	return 42 // trailing }
}
