package params

type Ring struct{}

func (r *Ring) Do(f func(any)) {
	f(r)
}

func Config(o struct {
	A int
	B string
}) string {
	return o.B
}

func Variadic(prefix string, args ...interface{ String() string }) {}

func Arrays(a [4]int, m map[struct{}]int) [2]func() {
	return [2]func(){}
}
