// Package empty has no functions.
package empty

type X struct{}

var Y = 1
