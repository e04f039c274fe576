package multiline

func Long(
	a int,
	b string,
	c []byte,
) (
	int,
	error,
) {
	return a, nil
}

func (w *Writer) WriteAll(
	p []byte,
) error {
	return nil
}

type Writer struct{}

func Tail(a int,
	b int) int {
	return a +
		b
}
