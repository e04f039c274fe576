package a

// Parse returns the length of s.
func Parse(s string) int {
	return len(s)
}

type T struct{ closed bool }

// Close marks t closed.
func (t *T) Close() error {
	t.closed = true
	return nil
}
