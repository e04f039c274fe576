package literals

var f = func() int {
	return 1
}

var (
	g = func() int { return 2 }
	h = func(x int) func() int {
		return func() int { return x }
	}
)

func Outer() func() int {
	inner := func() int {
		nested := func() {
			_ = 3
		}
		nested()
		return 4
	}
	return inner
}

func Apply(fn func(int) int, v int) int { return fn(v) }

var table = map[string]func(){
	"a": func() {},
	"b": func() {
		println("b")
	},
}
